#pragma once
// Adam with bias correction. Table parameters are updated only on the rows the
// sampling grid can reach; every other row has zero gradient forever, so its
// moments stay zero and its value never moves.

#include <cstdint>
#include <span>
#include <vector>

#include "styletopo/field/hash_field.hpp"

namespace styletopo::trainer {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Dense Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, AdamOptions opts = {});
  void step(std::span<double> params, std::span<const double> grads, double lr);
  std::uint64_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamOptions opts_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

// lr_initial * (lr_final / lr_initial)^(k / (iterations - 1)) for k in [0, iterations).
double exponential_lr(double lr_initial, double lr_final, int iteration, int iterations);

// Table rows touched by bilinear lookups at the h x w cell centres, as flat
// row indices (level * T + slot), sorted and unique.
std::vector<std::uint64_t> active_table_rows(const field::HashField& field, int h, int w);

// Adam over a HashField: sparse on the given table rows, dense on the decoder.
class FieldAdam {
 public:
  FieldAdam(const field::HashField& field, std::vector<std::uint64_t> active_rows, AdamOptions opts = {});

  // Applies one update and clears the consumed gradient entries.
  void step(field::HashField& field, field::FieldGradients& grads, double lr);

  std::size_t active_row_count() const { return rows_.size(); }

 private:
  std::vector<std::uint64_t> rows_;
  int features_;
  std::vector<double> param_buf_, grad_buf_;
  Adam tables_;
  Adam decoder_;
  std::vector<double> dec_param_, dec_grad_;
};

}  // namespace styletopo::trainer
