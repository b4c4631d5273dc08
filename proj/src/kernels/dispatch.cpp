#include <cstdlib>
#include <string_view>

#include "hardedge/kernels.hpp"

namespace hardedge::kernels {

#if defined(HARDEDGE_HAS_AVX2_BUILD)
namespace detail {
const KernelTable& avx2_table_unchecked();
}
#endif

const KernelTable* avx2_table() {
#if defined(HARDEDGE_HAS_AVX2_BUILD)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &detail::avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const char* env = std::getenv("HARDEDGE_KERNELS");
        env != nullptr && std::string_view(env) == "scalar") {
      return scalar_table();
    }
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace hardedge::kernels
