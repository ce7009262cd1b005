#include "styletopo/mechanics/pooling.hpp"

#include <string>

namespace styletopo::mechanics {

namespace {

void check(int h, int w, int k) {
  if (k < 1) throw DimensionError("average_pool: kernel must be >= 1");
  if (h % k != 0 || w % k != 0) {
    throw DimensionError("average_pool: " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by kernel " + std::to_string(k));
  }
}

}  // namespace

ScalarField average_pool(const ScalarField& rho, int k) {
  if (rho.channels != 1) throw DimensionError("average_pool: expected a single-channel field");
  check(rho.height, rho.width, k);
  ScalarField out(rho.height / k, rho.width / k, 1);
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int pi = 0; pi < out.height; ++pi) {
    for (int pj = 0; pj < out.width; ++pj) {
      double s = 0.0;
      for (int di = 0; di < k; ++di) {
        for (int dj = 0; dj < k; ++dj) s += rho.at(pi * k + di, pj * k + dj);
      }
      out.at(pi, pj) = s * inv;
    }
  }
  return out;
}

ScalarField average_pool_backward(const ScalarField& d_pooled, int k) {
  if (k < 1) throw DimensionError("average_pool: kernel must be >= 1");
  ScalarField out(d_pooled.height * k, d_pooled.width * k, 1);
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int i = 0; i < out.height; ++i) {
    for (int j = 0; j < out.width; ++j) out.at(i, j) = d_pooled.at(i / k, j / k) * inv;
  }
  return out;
}

}  // namespace styletopo::mechanics
