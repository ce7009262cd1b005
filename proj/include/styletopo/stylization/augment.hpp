#pragma once
// Random augmentation of the composed image: affine, resized crop, grayscale.
// Once the per-item parameters are recorded the map is linear in the input
// pixels, so the transpose is applied exactly by replaying the same taps.

#include <cstdint>
#include <random>
#include <vector>

#include "styletopo/grid.hpp"

namespace styletopo::stylization {

struct AffineParams {
  double rotation_deg = 0.0;
  double translate_x = 0.0;  // pixels
  double translate_y = 0.0;  // pixels
  double scale = 1.0;
};

// Crop window in the affine output, integer pixel extents.
struct CropParams {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

struct AugmentItem {
  AffineParams affine;
  CropParams crop;
  bool grayscale = false;
};

struct AugmentSpec {
  int batch = 16;
  int output_size = 224;
  double grayscale_prob = 0.1;
  double crop_area_min = 0.1;
  double crop_area_max = 1.0;
  double crop_aspect_min = 3.0 / 4.0;
  double crop_aspect_max = 4.0 / 3.0;
  double rotation_deg = 10.0;  // symmetric range
  double translation = 0.1;    // fraction of the image extent, symmetric
  double scale_min = 0.9;
  double scale_max = 1.1;
  double background_sigma = 8.0;
  std::uint64_t rng_seed = 0;

  // Parameters drawn by sample_augmentation for an input of this size.
  int input_height = 0;
  int input_width = 0;
  std::vector<AugmentItem> items;

  void validate() const;
};

// Draws `batch` items for an h x w input and stores them in spec.items.
void sample_augmentation(AugmentSpec& spec, int h, int w, std::mt19937_64& rng);

// Identity item for an h x w input: no affine change, full crop, colour kept.
AugmentItem identity_item(int h, int w);

// B x H_c x W_c x 3 interleaved pixels.
struct ImageBatch {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ImageBatch() = default;
  ImageBatch(int b, int h, int w) : count(b), height(h), width(w), data(static_cast<std::size_t>(b) * h * w * 3) {}
  std::size_t item_size() const { return static_cast<std::size_t>(height) * width * 3; }
};

// Applies the recorded items to I (h x w x 3).
ImageBatch augment(const Image& I, const AugmentSpec& spec);

// Transpose of augment: sums the per-item adjoints into an h x w x 3 image.
Image augment_transpose(const ImageBatch& d_batch, const AugmentSpec& spec);

}  // namespace styletopo::stylization
