#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "atlt/simd/kernels.hpp"

namespace atlt::simd {
namespace {

bool cpu_has_avx2() {
#if defined(ATLT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Level initial_level() {
  if (const char* env = std::getenv("ATLT_SIMD")) {
    const std::string name(env);
    if (name == "scalar") return Level::Scalar;
    if (name == "avx2") {
      if (!level_available(Level::Avx2)) {
        throw std::runtime_error("ATLT_SIMD=avx2 requested but AVX2 is unavailable");
      }
      return Level::Avx2;
    }
    throw std::runtime_error("ATLT_SIMD=" + name + " unknown (expected scalar or avx2)");
  }
  return level_available(Level::Avx2) ? Level::Avx2 : Level::Scalar;
}

std::atomic<Level>& active() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Scalar:
      return "scalar";
    case Level::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool level_available(Level level) {
  if (level == Level::Scalar) return true;
  static const bool avx2 = cpu_has_avx2();
  return avx2;
}

Level detected_level() { return initial_level(); }

Level active_level() { return active().load(std::memory_order_relaxed); }

void set_active_level(Level level) {
  if (!level_available(level)) {
    throw std::runtime_error("SIMD level " + std::string(level_name(level)) + " unavailable");
  }
  active().store(level, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& kernels_for(Level level) {
#ifdef ATLT_HAVE_AVX2
  if (level == Level::Avx2) return avx2::table<T>();
#endif
  (void)level;
  return scalar::table<T>();
}

template const KernelTable<float>& kernels_for<float>(Level);
template const KernelTable<double>& kernels_for<double>(Level);

}  // namespace atlt::simd
