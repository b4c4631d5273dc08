#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "hardedge/io.hpp"

using namespace hardedge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hardedge_io_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig sample_config() {
  ExperimentConfig cfg;
  cfg.name = "condition";
  cfg.n_list = {64, 128};
  cfg.m_offset = "log";
  cfg.ensemble = rademacher(true);
  cfg.grid = {0.5, 1.0 / 3.0};
  cfg.r_grid = {1, 2, 4};
  cfg.trials = 250;
  cfg.master_seed = 0xfeedbeefULL;
  cfg.knobs = {{"epsilon", 0.2}};
  cfg.calibration = {{"condition_median", 403.5}};
  cfg.output_path = "out/x";
  return cfg;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("doubles round trip through text") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
      CHECK(parse_double(format_double(v)) == v);
    }
    CHECK_THROWS(parse_double("abc"));
  }

  TEST_CASE("config round trip") {
    const auto cfg = sample_config();
    CHECK(config_from_json(config_to_json(cfg)) == cfg);
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    save_config(cfg, dir / "c.json");
    CHECK(load_config(dir / "c.json") == cfg);
    fs::remove_all(dir);
  }

  TEST_CASE("missing or malformed fields name the field") {
    auto j = config_to_json(sample_config());
    j.erase("trials");
    try {
      config_from_json(j);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.field() == "trials");
    }
    j = config_to_json(sample_config());
    j["trials"] = 10;
    CHECK_THROWS_AS(config_from_json(j), SchemaError);
    j = config_to_json(sample_config());
    j["ensemble"] = "cauchy";
    CHECK_THROWS_AS(config_from_json(j), SchemaError);
  }

  TEST_CASE("laws from labels") {
    CHECK(law_from_label("rademacher-complex") == rademacher(true));
    CHECK(law_from_label("gaussian-complex") == gaussian_complex());
    CHECK(law_from_json(law_to_json(uniform_symmetric())) == uniform_symmetric());
    CHECK(law_from_json(json("rademacher")) == rademacher());
    const RngStreamSpec s{7, 99};
    CHECK(stream_from_json(stream_to_json(s)) == s);
  }

  TEST_CASE("record csv round trip") {
    std::vector<TrialRecord> recs(3);
    for (int i = 0; i < 3; ++i) {
      recs[i] = {"universality", 64, 64, "rademacher", 0.5 * i, i, 12345678901234ULL + i,
                 0.001 / (i + 1), 2.0, 2000.0 * (i + 1), 1.0 / 3.0, -0.0};
    }
    std::stringstream io;
    write_records_csv(io, recs);
    std::string header;
    std::getline(std::stringstream(io.str()), header);
    CHECK(header == kRecordHeader);
    CHECK(read_records_csv(io) == recs);
  }

  TEST_CASE("summary json carries the all_ok flag") {
    SummaryStats s;
    s.experiment = "universality";
    s.margins.push_back({"a", 64, 1.0, 0.1, 0.2, Margin::Kind::Upper});
    auto j = summary_to_json(s, sample_config());
    CHECK(j["all_ok"] == true);
    CHECK(j["config_echo"]["trials"] == 250);
    s.margins.push_back({"b", 64, 1.0, 0.1, 0.2, Margin::Kind::Lower});
    CHECK(summary_to_json(s, sample_config())["all_ok"] == false);
  }

  TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("manifest detects tampering") {
    const auto dir = scratch("manifest");
    prepare_output_dir(dir, false);
    std::ofstream(dir / "records.csv") << "x\n";
    fs::create_directories(dir / "plots");
    std::ofstream(dir / "plots" / "p.csv") << "y\n";
    RunManifest m;
    m.config = sample_config();
    m.started_at = utc_now();
    m.finished_at = utc_now();
    write_manifest(m, dir);
    const auto back = read_manifest(dir);
    CHECK(back.config == m.config);
    CHECK(back.artifact_hashes.size() == 2);
    CHECK(verify_manifest(dir).empty());
    std::ofstream(dir / "records.csv") << "changed\n";
    CHECK(verify_manifest(dir) == std::vector<std::string>{"records.csv"});
    fs::remove_all(dir);
  }

  TEST_CASE("incompatible schema is rejected") {
    const auto dir = scratch("schema");
    fs::create_directories(dir);
    RunManifest m;
    m.config = sample_config();
    write_manifest(m, dir);
    auto j = json::parse(std::ifstream(dir / "manifest.json"));
    j["schema_version"] = "9.0";
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_AS(read_manifest(dir), SchemaError);
    fs::remove_all(dir);
  }

  TEST_CASE("output directory is never silently overwritten") {
    const auto dir = scratch("outdir");
    prepare_output_dir(dir, false);
    CHECK(fs::is_directory(dir));
    prepare_output_dir(dir, false);  // empty is fine
    std::ofstream(dir / "keep.txt") << "data";
    CHECK_THROWS_AS(prepare_output_dir(dir, false), std::invalid_argument);
    CHECK(fs::exists(dir / "keep.txt"));
    prepare_output_dir(dir, true);
    CHECK(fs::is_empty(dir));
    fs::remove_all(dir);
  }
}
