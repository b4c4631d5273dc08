#include "hardedge/cli.hpp"

int main(int argc, char** argv) { return hardedge::cli_main(argc, argv); }
