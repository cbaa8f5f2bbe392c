#include <immintrin.h>

#include "atlt/simd/kernels.hpp"

// The gemm, axpy and sgd kernels keep the scalar reference's per-element
// operation order (separate multiply and add, k ascending), so their results
// are bitwise identical to it. Only dot reassociates.

namespace atlt::simd::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  using V = Vec<T>;
  constexpr std::size_t w = V::width;
  constexpr std::size_t block = 4 * w;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * lda;
    T* crow = c + i * ldc;
    std::size_t j = 0;
    for (; j + block <= n; j += block) {
      typename V::reg c0, c1, c2, c3;
      if (accumulate) {
        c0 = V::load(crow + j);
        c1 = V::load(crow + j + w);
        c2 = V::load(crow + j + 2 * w);
        c3 = V::load(crow + j + 3 * w);
      } else {
        c0 = c1 = c2 = c3 = V::zero();
      }
      for (std::size_t p = 0; p < k; ++p) {
        const auto av = V::set1(arow[p]);
        const T* brow = b + p * ldb + j;
        c0 = V::add(c0, V::mul(av, V::load(brow)));
        c1 = V::add(c1, V::mul(av, V::load(brow + w)));
        c2 = V::add(c2, V::mul(av, V::load(brow + 2 * w)));
        c3 = V::add(c3, V::mul(av, V::load(brow + 3 * w)));
      }
      V::store(crow + j, c0);
      V::store(crow + j + w, c1);
      V::store(crow + j + 2 * w, c2);
      V::store(crow + j + 3 * w, c3);
    }
    for (; j + w <= n; j += w) {
      auto acc = accumulate ? V::load(crow + j) : V::zero();
      for (std::size_t p = 0; p < k; ++p) {
        acc = V::add(acc, V::mul(V::set1(arow[p]), V::load(b + p * ldb + j)));
      }
      V::store(crow + j, acc);
    }
    for (; j < n; ++j) {
      T acc = accumulate ? crow[j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * ldb + j];
      crow[j] = acc;
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    V::store(y + i, V::add(V::load(y + i), V::mul(av, V::load(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::width <= n; i += 2 * V::width) {
    acc0 = V::add(acc0, V::mul(V::load(x + i), V::load(y + i)));
    acc1 = V::add(acc1, V::mul(V::load(x + i + V::width), V::load(y + i + V::width)));
  }
  for (; i + V::width <= n; i += V::width) {
    acc0 = V::add(acc0, V::mul(V::load(x + i), V::load(y + i)));
  }
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void sgd_momentum(std::size_t n, T lr, T momentum, T weight_decay, const T* g, T* w, T* v) {
  using V = Vec<T>;
  const auto lrv = V::set1(lr);
  const auto mv = V::set1(momentum);
  const auto wdv = V::set1(weight_decay);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto wi = V::load(w + i);
    const auto step = V::add(V::load(g + i), V::mul(wdv, wi));
    const auto vi = V::add(V::mul(mv, V::load(v + i)), step);
    V::store(v + i, vi);
    V::store(w + i, V::sub(wi, V::mul(lrv, vi)));
  }
  for (; i < n; ++i) {
    const T step = g[i] + weight_decay * w[i];
    v[i] = momentum * v[i] + step;
    w[i] = w[i] - lr * v[i];
  }
}

}  // namespace

template <typename T>
const KernelTable<T>& table() {
  static const KernelTable<T> t{&gemm<T>, &axpy<T>, &dot<T>, &sgd_momentum<T>};
  return t;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace atlt::simd::avx2
