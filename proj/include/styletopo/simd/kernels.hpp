#pragma once
// Data-parallel inner loops shared by the field, solver, labeling and
// optimizer code. Every kernel has a portable scalar reference and, on x86-64,
// an AVX2+FMA variant. The active table is chosen once at startup from CPUID
// and can be pinned to the scalar set (reproducible runs, equivalence tests).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace styletopo::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct AdamCoefficients {
  double step_size;   // lr / (1 - beta1^t)
  double beta1;
  double beta2;
  double inv_bias2;   // 1 / (1 - beta2^t)
  double eps;
};

struct KernelTable {
  Isa isa;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // out[r] = bias[r] + dot(w[r, :], x) for a row-major rows x cols matrix
  void (*affine)(const double* w, const double* bias, const double* x,
                 double* out, std::size_t rows, std::size_t cols);

  // w[r, :] += dy[r] * x  (rank-one accumulation into a row-major matrix)
  void (*outer_accumulate)(const double* dy, const double* x, double* w,
                           std::size_t rows, std::size_t cols);

  // out[j] = max(in[j-1], in[j], in[j+1]) with out-of-range taps ignored
  void (*row_max3)(const std::int32_t* in, std::int32_t* out, std::size_t n);

  // out[j] = mask[j] ? max(a[j], b[j], c[j]) : 0; returns true when out
  // differs from prev anywhere
  bool (*col_max3_masked)(const std::int32_t* a, const std::int32_t* b,
                          const std::int32_t* c, const std::uint8_t* mask,
                          const std::int32_t* prev, std::int32_t* out,
                          std::size_t n);

  // Bias-corrected Adam moment update applied in place.
  void (*adam_update)(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoefficients& k);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

// Best ISA supported by the running CPU, overridable through the
// STYLETOPO_ISA environment variable ("scalar" or "avx2").
Isa detect_isa();

const KernelTable& kernels();
void select_isa(Isa isa);
Isa active_isa();

}  // namespace styletopo::simd
