#include <cstdlib>
#include <cstring>

#include "surt/kernels.hpp"

namespace surt::kernels {

bool avx2_supported() {
#if defined(SURT_HAVE_AVX2_BUILD) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

#if !defined(SURT_HAVE_AVX2_BUILD)
const Ops& avx2() { return scalar(); }
#endif

namespace {

const Ops& select() {
  const char* env = std::getenv("SURT_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return scalar();
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return avx2();
  }
  return avx2_supported() ? avx2() : scalar();
}

}  // namespace

const Ops& active() {
  static const Ops& chosen = select();
  return chosen;
}

}  // namespace surt::kernels
