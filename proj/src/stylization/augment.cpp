#include "styletopo/stylization/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "styletopo/stylization/compose.hpp"

namespace styletopo::stylization {

void AugmentSpec::validate() const {
  if (batch < 1) throw ValidationError("augment: batch must be >= 1");
  if (output_size < 1) throw ValidationError("augment: output size must be >= 1");
  if (!(grayscale_prob >= 0.0 && grayscale_prob <= 1.0)) throw ValidationError("augment: grayscale_prob must lie in [0, 1]");
  if (!(crop_area_min > 0.0 && crop_area_min <= crop_area_max && crop_area_max <= 1.0)) {
    throw ValidationError("augment: crop area range must satisfy 0 < min <= max <= 1");
  }
  if (!(crop_aspect_min > 0.0 && crop_aspect_min <= crop_aspect_max)) {
    throw ValidationError("augment: crop aspect range must satisfy 0 < min <= max");
  }
  if (!(rotation_deg >= 0.0)) throw ValidationError("augment: rotation range must be >= 0");
  if (!(translation >= 0.0 && translation <= 1.0)) throw ValidationError("augment: translation must lie in [0, 1]");
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ValidationError("augment: scale range must satisfy 0 < min <= max");
  if (!(background_sigma > 0.0)) throw ValidationError("augment: background sigma must be positive");
}

AugmentItem identity_item(int h, int w) {
  AugmentItem it;
  it.crop = {0, 0, h, w};
  return it;
}

namespace {

CropParams sample_crop(const AugmentSpec& spec, int h, int w, std::mt19937_64& rng) {
  const double area = static_cast<double>(h) * w;
  std::uniform_real_distribution<double> area_dist(spec.crop_area_min, spec.crop_area_max);
  std::uniform_real_distribution<double> log_ratio(std::log(spec.crop_aspect_min), std::log(spec.crop_aspect_max));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * area_dist(rng);
    const double ratio = std::exp(log_ratio(rng));
    const int cw = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int ch = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (cw > 0 && cw <= w && ch > 0 && ch <= h) {
      std::uniform_int_distribution<int> top(0, h - ch);
      std::uniform_int_distribution<int> left(0, w - cw);
      const int t = top(rng);
      return {t, left(rng), ch, cw};
    }
  }
  // central crop at the nearest admissible aspect ratio
  const double in_ratio = static_cast<double>(w) / h;
  int cw = w;
  int ch = h;
  if (in_ratio < spec.crop_aspect_min) {
    ch = std::max(1, static_cast<int>(std::lround(w / spec.crop_aspect_min)));
  } else if (in_ratio > spec.crop_aspect_max) {
    cw = std::max(1, static_cast<int>(std::lround(h * spec.crop_aspect_max)));
  }
  return {(h - ch) / 2, (w - cw) / 2, ch, cw};
}

struct Tap {
  std::size_t src;
  double weight;
};

// Bilinear taps of the inverse affine map for output pixel (i, j); samples
// outside the image contribute zero.
int affine_taps(const AffineParams& a, int h, int w, int i, int j, Tap* taps) {
  const double theta = a.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = 0.5 * w;
  const double cy = 0.5 * h;
  const double dx = (j + 0.5) - cx - a.translate_x;
  const double dy = (i + 0.5) - cy - a.translate_y;
  const double sx = (c * dx + s * dy) / a.scale + cx - 0.5;
  const double sy = (-s * dx + c * dy) / a.scale + cy - 0.5;
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  const long x0 = static_cast<long>(fx0);
  const long y0 = static_cast<long>(fy0);
  int n = 0;
  const long xs[2] = {x0, x0 + 1};
  const long ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  for (int b = 0; b < 2; ++b) {
    if (ys[b] < 0 || ys[b] >= h) continue;
    for (int a2 = 0; a2 < 2; ++a2) {
      if (xs[a2] < 0 || xs[a2] >= w) continue;
      const double wt = wy[b] * wx[a2];
      if (wt == 0.0) continue;
      taps[n++] = {static_cast<std::size_t>(ys[b]) * w + static_cast<std::size_t>(xs[a2]), wt};
    }
  }
  return n;
}

// Bilinear taps of the crop-and-resize for output pixel (u, v), source
// coordinates clamped to the crop window.
int crop_taps(const CropParams& cr, int w, int out_h, int out_w, int u, int v, Tap* taps) {
  const double sy = std::clamp((u + 0.5) * cr.height / out_h - 0.5, 0.0, cr.height - 1.0);
  const double sx = std::clamp((v + 0.5) * cr.width / out_w - 0.5, 0.0, cr.width - 1.0);
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, cr.height - 1);
  const int x1 = std::min(x0 + 1, cr.width - 1);
  const double fy = sy - y0;
  const double fx = sx - x0;
  int n = 0;
  auto add = [&](int y, int x, double wt) {
    if (wt != 0.0) taps[n++] = {static_cast<std::size_t>(cr.top + y) * w + static_cast<std::size_t>(cr.left + x), wt};
  };
  add(y0, x0, (1.0 - fy) * (1.0 - fx));
  add(y0, x1, (1.0 - fy) * fx);
  add(y1, x0, fy * (1.0 - fx));
  add(y1, x1, fy * fx);
  return n;
}

void check_items(const AugmentSpec& spec) {
  if (spec.items.empty()) throw ValidationError("augment: no sampled items; call sample_augmentation first");
  for (const auto& it : spec.items) {
    const auto& c = it.crop;
    if (c.height < 1 || c.width < 1 || c.top < 0 || c.left < 0 || c.top + c.height > spec.input_height ||
        c.left + c.width > spec.input_width) {
      throw ValidationError("augment: recorded crop lies outside the input");
    }
    if (!(it.affine.scale > 0.0)) throw ValidationError("augment: recorded scale must be positive");
  }
}

}  // namespace

void sample_augmentation(AugmentSpec& spec, int h, int w, std::mt19937_64& rng) {
  spec.validate();
  if (h < 1 || w < 1) throw DimensionError("augment: empty input");
  spec.input_height = h;
  spec.input_width = w;
  spec.items.clear();
  std::uniform_real_distribution<double> rot(-spec.rotation_deg, spec.rotation_deg);
  std::uniform_real_distribution<double> tx(-spec.translation * w, spec.translation * w);
  std::uniform_real_distribution<double> ty(-spec.translation * h, spec.translation * h);
  std::uniform_real_distribution<double> sc(spec.scale_min, spec.scale_max);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int b = 0; b < spec.batch; ++b) {
    AugmentItem it;
    it.affine.rotation_deg = rot(rng);
    it.affine.translate_x = tx(rng);
    it.affine.translate_y = ty(rng);
    it.affine.scale = sc(rng);
    it.crop = sample_crop(spec, h, w, rng);
    it.grayscale = coin(rng) < spec.grayscale_prob;
    spec.items.push_back(it);
  }
}

ImageBatch augment(const Image& I, const AugmentSpec& spec) {
  check_items(spec);
  if (I.channels != 3 || I.height != spec.input_height || I.width != spec.input_width) {
    throw ShapeMismatchError("augment: image shape differs from the sampled input shape");
  }
  const int h = I.height;
  const int w = I.width;
  const int oh = spec.output_size;
  const int ow = spec.output_size;
  ImageBatch out(static_cast<int>(spec.items.size()), oh, ow);
  Image warped(h, w, 3);
  Tap taps[4];
  for (std::size_t b = 0; b < spec.items.size(); ++b) {
    const AugmentItem& it = spec.items[b];
    std::fill(warped.data.begin(), warped.data.end(), 0.0);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int n = affine_taps(it.affine, h, w, i, j, taps);
        double* dst = &warped.data[(static_cast<std::size_t>(i) * w + j) * 3];
        for (int t = 0; t < n; ++t) {
          const double* src = &I.data[taps[t].src * 3];
          for (int c = 0; c < 3; ++c) dst[c] += taps[t].weight * src[c];
        }
      }
    }
    double* item = out.data.data() + b * out.item_size();
    for (int u = 0; u < oh; ++u) {
      for (int v = 0; v < ow; ++v) {
        const int n = crop_taps(it.crop, w, oh, ow, u, v, taps);
        double* dst = item + (static_cast<std::size_t>(u) * ow + v) * 3;
        for (int t = 0; t < n; ++t) {
          const double* src = &warped.data[taps[t].src * 3];
          for (int c = 0; c < 3; ++c) dst[c] += taps[t].weight * src[c];
        }
        if (it.grayscale) {
          const double y = kLumaR * dst[0] + kLumaG * dst[1] + kLumaB * dst[2];
          dst[0] = dst[1] = dst[2] = y;
        }
      }
    }
  }
  return out;
}

Image augment_transpose(const ImageBatch& d_batch, const AugmentSpec& spec) {
  check_items(spec);
  if (d_batch.count != static_cast<int>(spec.items.size()) || d_batch.height != spec.output_size ||
      d_batch.width != spec.output_size || d_batch.data.size() != d_batch.item_size() * d_batch.count) {
    throw ShapeMismatchError("augment_transpose: gradient batch is " + std::to_string(d_batch.count) + "x" +
                             std::to_string(d_batch.height) + "x" + std::to_string(d_batch.width) +
                             ", expected " + std::to_string(spec.items.size()) + "x" +
                             std::to_string(spec.output_size) + "x" + std::to_string(spec.output_size));
  }
  const int h = spec.input_height;
  const int w = spec.input_width;
  const int oh = spec.output_size;
  const int ow = spec.output_size;
  Image dI(h, w, 3);
  Image d_warped(h, w, 3);
  Tap taps[4];
  for (std::size_t b = 0; b < spec.items.size(); ++b) {
    const AugmentItem& it = spec.items[b];
    std::fill(d_warped.data.begin(), d_warped.data.end(), 0.0);
    const double* item = d_batch.data.data() + b * d_batch.item_size();
    for (int u = 0; u < oh; ++u) {
      for (int v = 0; v < ow; ++v) {
        const double* g = item + (static_cast<std::size_t>(u) * ow + v) * 3;
        double gc[3] = {g[0], g[1], g[2]};
        if (it.grayscale) {
          const double s = g[0] + g[1] + g[2];
          gc[0] = kLumaR * s;
          gc[1] = kLumaG * s;
          gc[2] = kLumaB * s;
        }
        const int n = crop_taps(it.crop, w, oh, ow, u, v, taps);
        for (int t = 0; t < n; ++t) {
          double* dst = &d_warped.data[taps[t].src * 3];
          for (int c = 0; c < 3; ++c) dst[c] += taps[t].weight * gc[c];
        }
      }
    }
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double* g = &d_warped.data[(static_cast<std::size_t>(i) * w + j) * 3];
        if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
        const int n = affine_taps(it.affine, h, w, i, j, taps);
        for (int t = 0; t < n; ++t) {
          double* dst = &dI.data[taps[t].src * 3];
          for (int c = 0; c < 3; ++c) dst[c] += taps[t].weight * g[c];
        }
      }
    }
  }
  return dI;
}

}  // namespace styletopo::stylization
