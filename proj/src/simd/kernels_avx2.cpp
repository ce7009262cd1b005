// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "styletopo/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace styletopo::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void affine_avx2(const double* w, const double* bias, const double* x,
                 double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = bias[r] + dot_avx2(w + r * cols, x, cols);
  }
}

void outer_accumulate_avx2(const double* dy, const double* x, double* w,
                           std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dy[r] == 0.0) continue;
    axpy_avx2(dy[r], x, w + r * cols, cols);
  }
}

void row_max3_avx2(const std::int32_t* in, std::int32_t* out, std::size_t n) {
  if (n < 10) {
    scalar_kernels().row_max3(in, out, n);
    return;
  }
  out[0] = std::max(in[0], in[1]);
  std::size_t j = 1;
  for (; j + 9 <= n; j += 8) {
    const __m256i l = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + j - 1));
    const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + j));
    const __m256i r = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + j + 1));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + j),
                        _mm256_max_epi32(_mm256_max_epi32(l, c), r));
  }
  for (; j + 1 < n; ++j) out[j] = std::max({in[j - 1], in[j], in[j + 1]});
  out[n - 1] = std::max(in[n - 2], in[n - 1]);
}

bool col_max3_masked_avx2(const std::int32_t* a, const std::int32_t* b,
                          const std::int32_t* c, const std::uint8_t* mask,
                          const std::int32_t* prev, std::int32_t* out,
                          std::size_t n) {
  __m256i diff = _mm256_setzero_si256();
  const __m256i zero = _mm256_setzero_si256();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + j));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + j));
    const __m256i vc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(c + j));
    const __m128i m8 = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + j));
    // lanes with mask byte 0 become all-ones, then cleared via andnot
    const __m256i off = _mm256_cmpeq_epi32(_mm256_cvtepu8_epi32(m8), zero);
    const __m256i mx = _mm256_max_epi32(_mm256_max_epi32(va, vb), vc);
    const __m256i res = _mm256_andnot_si256(off, mx);
    const __m256i vp = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(prev + j));
    diff = _mm256_or_si256(diff, _mm256_xor_si256(res, vp));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + j), res);
  }
  bool changed = !_mm256_testz_si256(diff, diff);
  for (; j < n; ++j) {
    const std::int32_t m = mask[j] ? std::max({a[j], b[j], c[j]}) : 0;
    changed |= (m != prev[j]);
    out[j] = m;
  }
  return changed;
}

void adam_update_avx2(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoefficients& k) {
  const __m256d b1 = _mm256_set1_pd(k.beta1);
  const __m256d b2 = _mm256_set1_pd(k.beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - k.beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - k.beta2);
  const __m256d ib2 = _mm256_set1_pd(k.inv_bias2);
  const __m256d eps = _mm256_set1_pd(k.eps);
  const __m256d step = _mm256_set1_pd(k.step_size);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(ob1, g));
    const __m256d vi = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                       _mm256_mul_pd(ob2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, ib2)), eps);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(step, mi), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
  }
  if (i < n) {
    scalar_kernels().adam_update(param + i, grad + i, m + i, v + i, n - i, k);
  }
}

constexpr KernelTable kAvx2{
    Isa::Avx2,          dot_avx2,
    axpy_avx2,          affine_avx2,
    outer_accumulate_avx2, row_max3_avx2,
    col_max3_masked_avx2, adam_update_avx2,
};

}  // namespace

const KernelTable* avx2_kernels() { return &kAvx2; }

}  // namespace styletopo::simd
