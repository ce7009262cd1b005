#include "styletopo/trainer/adam.hpp"

#include <algorithm>
#include <cmath>

#include "styletopo/errors.hpp"
#include "styletopo/simd/kernels.hpp"

namespace styletopo::trainer {

Adam::Adam(std::size_t n, AdamOptions opts) : opts_(opts), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("adam: parameter and gradient sizes differ from the optimizer state");
  }
  if (!(lr > 0.0)) throw ValidationError("adam: learning rate must be positive");
  ++t_;
  const double td = static_cast<double>(t_);
  simd::AdamCoefficients k{};
  k.step_size = lr / (1.0 - std::pow(opts_.beta1, td));
  k.beta1 = opts_.beta1;
  k.beta2 = opts_.beta2;
  k.inv_bias2 = 1.0 / (1.0 - std::pow(opts_.beta2, td));
  k.eps = opts_.eps;
  simd::kernels().adam_update(params.data(), grads.data(), m_.data(), v_.data(), m_.size(), k);
}

double exponential_lr(double lr_initial, double lr_final, int iteration, int iterations) {
  if (iterations <= 1) return lr_initial;
  const double frac = static_cast<double>(iteration) / (iterations - 1);
  return lr_initial * std::pow(lr_final / lr_initial, frac);
}

std::vector<std::uint64_t> active_table_rows(const field::HashField& field, int h, int w) {
  const auto& cfg = field.config();
  std::vector<std::uint64_t> rows;
  for (int l = 0; l < cfg.levels; ++l) {
    std::vector<std::uint64_t> level_rows;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const auto c = field::level_corners(field, l, field::cell_center(i, j, h, w));
        for (int k = 0; k < 4; ++k) level_rows.push_back(static_cast<std::uint64_t>(l) * cfg.table_size + c.index[k]);
      }
    }
    std::sort(level_rows.begin(), level_rows.end());
    level_rows.erase(std::unique(level_rows.begin(), level_rows.end()), level_rows.end());
    rows.insert(rows.end(), level_rows.begin(), level_rows.end());
  }
  return rows;
}

namespace {

std::size_t decoder_size(const field::Decoder& d) { return d.parameter_count(); }

void flatten(const field::Decoder& d, std::vector<double>& out) {
  out.clear();
  out.insert(out.end(), d.w1.begin(), d.w1.end());
  out.insert(out.end(), d.b1.begin(), d.b1.end());
  out.insert(out.end(), d.w2.begin(), d.w2.end());
  out.insert(out.end(), d.b2.begin(), d.b2.end());
}

void unflatten(const std::vector<double>& in, field::Decoder& d) {
  auto it = in.begin();
  for (auto* v : {&d.w1, &d.b1, &d.w2, &d.b2}) {
    std::copy(it, it + static_cast<long>(v->size()), v->begin());
    it += static_cast<long>(v->size());
  }
}

}  // namespace

FieldAdam::FieldAdam(const field::HashField& field, std::vector<std::uint64_t> active_rows, AdamOptions opts)
    : rows_(std::move(active_rows)),
      features_(field.config().features),
      param_buf_(rows_.size() * static_cast<std::size_t>(features_)),
      grad_buf_(param_buf_.size()),
      tables_(param_buf_.size(), opts),
      decoder_(decoder_size(field.decoder()), opts) {}

void FieldAdam::step(field::HashField& field, field::FieldGradients& grads, double lr) {
  const auto f = static_cast<std::size_t>(features_);
  auto tables = field.tables();
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const std::size_t base = rows_[r] * f;
    for (std::size_t q = 0; q < f; ++q) {
      param_buf_[r * f + q] = tables[base + q];
      grad_buf_[r * f + q] = grads.d_tables[base + q];
      grads.d_tables[base + q] = 0.0;
    }
  }
  tables_.step(param_buf_, grad_buf_, lr);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const std::size_t base = rows_[r] * f;
    for (std::size_t q = 0; q < f; ++q) tables[base + q] = param_buf_[r * f + q];
  }

  flatten(field.decoder(), dec_param_);
  flatten(grads.d_decoder, dec_grad_);
  decoder_.step(dec_param_, dec_grad_, lr);
  unflatten(dec_param_, field.decoder());
  for (auto* v : {&grads.d_decoder.w1, &grads.d_decoder.b1, &grads.d_decoder.w2, &grads.d_decoder.b2}) {
    std::fill(v->begin(), v->end(), 0.0);
  }
}

}  // namespace styletopo::trainer
