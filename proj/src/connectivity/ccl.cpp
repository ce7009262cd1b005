#include "styletopo/connectivity/ccl.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "styletopo/simd/kernels.hpp"

namespace styletopo::connectivity {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Mask binarize(const ScalarField& rho, double threshold) {
  if (rho.channels != 1) throw DimensionError("binarize: expected a single-channel field");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("binarize: threshold must lie in (0, 1)");
  Mask m{rho.height, rho.width, std::vector<std::uint8_t>(rho.data.size())};
  for (std::size_t p = 0; p < rho.data.size(); ++p) m.bits[p] = rho.data[p] >= threshold ? 1 : 0;
  return m;
}

namespace {

// Separable 3x3 max (rows then columns) followed by the mask. Returns true
// when the labels changed.
bool pool_pass(const Mask& mask, const std::vector<std::int32_t>& src, std::vector<std::int32_t>& row_max,
               std::vector<std::int32_t>& dst) {
  const auto& k = simd::kernels();
  const int h = mask.height;
  const auto w = static_cast<std::size_t>(mask.width);
  for (int i = 0; i < h; ++i) k.row_max3(src.data() + i * w, row_max.data() + i * w, w);
  bool changed = false;
  for (int i = 0; i < h; ++i) {
    const std::int32_t* mid = row_max.data() + i * w;
    const std::int32_t* up = i > 0 ? mid - w : mid;
    const std::int32_t* down = i + 1 < h ? mid + w : mid;
    changed |= k.col_max3_masked(up, mid, down, mask.bits.data() + i * w, src.data() + i * w,
                                 dst.data() + i * w, w);
  }
  return changed;
}

}  // namespace

ComponentLabels ccl_labels(const Mask& mask, int max_iters) {
  if (max_iters < 1) throw ValidationError("ccl_labels: max_iters must be >= 1");
  ComponentLabels out;
  out.height = mask.height;
  out.width = mask.width;
  const std::size_t n = mask.bits.size();
  std::vector<std::int32_t> q(n), row_max(n), next(n);
  for (std::size_t p = 0; p < n; ++p) q[p] = mask.bits[p] ? static_cast<std::int32_t>(p + 1) : 0;
  for (int it = 0; it < max_iters; ++it) {
    const bool changed = pool_pass(mask, q, row_max, next);
    out.iterations = it + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    q.swap(next);
  }
  if (!out.converged) {
    std::cerr << "warning: connected-component labeling stopped after " << max_iters
              << " iterations without reaching a fixed point\n";
  }
  out.labels = std::move(q);
  for (std::int32_t l : out.labels) {
    if (l != 0) ++out.counts[l];
  }
  return out;
}

bool is_fixed_point(const Mask& mask, const ComponentLabels& labels) {
  std::vector<std::int32_t> row_max(labels.labels.size()), next(labels.labels.size());
  return !pool_pass(mask, labels.labels, row_max, next);
}

ConnLoss conn_loss(const ScalarField& rho, ComponentLabels& labels, double min_fraction) {
  if (rho.height != labels.height || rho.width != labels.width || rho.channels != 1) {
    throw DimensionError("conn_loss: labels and density differ in shape");
  }
  ConnLoss out;
  out.gradient = ScalarField(rho.height, rho.width, 1);
  labels.disconnected.assign(labels.labels.size(), 0);
  if (labels.counts.empty()) return out;

  // ties broken toward the larger label for a deterministic choice
  std::int32_t largest = 0;
  std::size_t largest_count = 0;
  for (const auto& [label, count] : labels.counts) {
    if (count >= largest_count) {
      largest = label;
      largest_count = count;
    }
  }
  const double limit = min_fraction * static_cast<double>(rho.height) * rho.width;
  std::map<std::int32_t, bool> flagged;
  for (const auto& [label, count] : labels.counts) {
    const bool f = label != largest && static_cast<double>(count) < limit;
    flagged[label] = f;
    out.flagged_components += f ? 1 : 0;
  }
  if (out.flagged_components == 0) return out;
  for (std::size_t p = 0; p < labels.labels.size(); ++p) {
    const std::int32_t l = labels.labels[p];
    if (l != 0 && flagged[l]) {
      labels.disconnected[p] = 1;
      out.value += rho.data[p];
      out.gradient.data[p] = 1.0;
    }
  }
  return out;
}

}  // namespace styletopo::connectivity
