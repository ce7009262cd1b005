#include "styletopo/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace styletopo::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_scalar(const double* w, const double* bias, const double* x,
                   double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = bias[r] + dot_scalar(w + r * cols, x, cols);
  }
}

void outer_accumulate_scalar(const double* dy, const double* x, double* w,
                             std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dy[r] == 0.0) continue;
    axpy_scalar(dy[r], x, w + r * cols, cols);
  }
}

void row_max3_scalar(const std::int32_t* in, std::int32_t* out,
                     std::size_t n) {
  if (n == 0) return;
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  out[0] = std::max(in[0], in[1]);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    out[j] = std::max({in[j - 1], in[j], in[j + 1]});
  }
  out[n - 1] = std::max(in[n - 2], in[n - 1]);
}

bool col_max3_masked_scalar(const std::int32_t* a, const std::int32_t* b,
                            const std::int32_t* c, const std::uint8_t* mask,
                            const std::int32_t* prev, std::int32_t* out,
                            std::size_t n) {
  bool changed = false;
  for (std::size_t j = 0; j < n; ++j) {
    const std::int32_t m = mask[j] ? std::max({a[j], b[j], c[j]}) : 0;
    changed |= (m != prev[j]);
    out[j] = m;
  }
  return changed;
}

void adam_update_scalar(double* param, const double* grad, double* m,
                        double* v, std::size_t n, const AdamCoefficients& k) {
  const double one_b1 = 1.0 - k.beta1;
  const double one_b2 = 1.0 - k.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = k.beta1 * m[i] + one_b1 * g;
    v[i] = k.beta2 * v[i] + one_b2 * (g * g);
    const double denom = std::sqrt(v[i] * k.inv_bias2) + k.eps;
    param[i] -= k.step_size * m[i] / denom;
  }
}

constexpr KernelTable kScalar{
    Isa::Scalar,          dot_scalar,
    axpy_scalar,          affine_scalar,
    outer_accumulate_scalar, row_max3_scalar,
    col_max3_masked_scalar, adam_update_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace styletopo::simd
