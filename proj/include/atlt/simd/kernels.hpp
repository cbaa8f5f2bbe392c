#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops used by the autodiff core. Every kernel exists as a scalar
// reference and, where the build supports it, an AVX2 variant. The variant is
// picked once at startup from the CPU features; ATLT_SIMD=scalar|avx2 overrides.

namespace atlt::simd {

enum class Level { Scalar, Avx2 };

std::string_view level_name(Level level);

template <typename T>
struct KernelTable {
  // C[MxN] = (accumulate ? C : 0) + A[MxK] * B[KxN], all row-major with leading dims.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
               const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // v = momentum*v + (g + wd*w); w = w - lr*v. No fused multiply-add, so every
  // variant is bitwise identical to the scalar one.
  void (*sgd_momentum)(std::size_t n, T lr, T momentum, T weight_decay, const T* g, T* w, T* v);
};

bool level_available(Level level);

// Highest level supported by both the build and the running CPU, unless
// overridden through the environment.
Level detected_level();

// Level used by the kernels() accessor. Changeable for tests and benchmarks.
Level active_level();
void set_active_level(Level level);

template <typename T>
const KernelTable<T>& kernels_for(Level level);

template <typename T>
const KernelTable<T>& kernels() {
  return kernels_for<T>(active_level());
}

namespace scalar {
template <typename T>
const KernelTable<T>& table();
}

#ifdef ATLT_HAVE_AVX2
namespace avx2 {
template <typename T>
const KernelTable<T>& table();
}
#endif

}  // namespace atlt::simd
