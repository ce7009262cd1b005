#pragma once
// Multi-resolution hash-grid encoding with a two-layer 1x1-conv decoder that
// maps normalized 2D coordinates to (rho, r, g, b).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "styletopo/grid.hpp"

namespace styletopo::field {

inline constexpr std::uint64_t kHashPrimeY = 2654435761ull;
inline constexpr int kOutputChannels = 4;

struct GridConfig {
  int levels = 16;
  std::uint64_t table_size = 1ull << 19;
  int features = 2;
  int min_resolution = 8;
  int max_resolution = 256;
  int hidden_width = 64;

  // Throws ValidationError.
  void validate() const;

  // exp((ln N_max - ln N_min) / (L - 1))
  double growth() const;

  int feature_width() const { return levels * features; }

  bool operator==(const GridConfig&) const = default;
};

std::vector<int> level_resolutions(const GridConfig& cfg);

// ((vx * 1) XOR (vy * 2654435761)) mod T in 64-bit unsigned arithmetic.
inline std::uint64_t hash_index(std::uint64_t vx, std::uint64_t vy,
                                std::uint64_t table_size) {
  return (vx ^ (vy * kHashPrimeY)) % table_size;
}

struct Vec2 {
  double x = 0.0;  // horizontal, [0, 1] left to right
  double y = 0.0;  // vertical, [0, 1] top to bottom
};

struct Decoder {
  std::vector<double> w1;  // hidden x (L*F), row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // 4 x hidden, row-major
  std::vector<double> b2;  // 4

  std::size_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
};

// Gradient buffers with the exact shapes of HashField.
struct FieldGradients {
  std::vector<double> d_tables;
  Decoder d_decoder;

  void zero();
  bool all_finite() const;
};

class HashField {
 public:
  // Zero tables and zero decoder.
  explicit HashField(const GridConfig& cfg, std::uint64_t seed = 0);

  const GridConfig& config() const { return cfg_; }
  const std::vector<int>& resolutions() const { return resolutions_; }
  std::uint64_t seed() const { return seed_; }

  std::span<double> tables() { return tables_; }
  std::span<const double> tables() const { return tables_; }
  // Row (l, i) of the level-l table: F consecutive features.
  std::span<const double> table_row(int level, std::uint64_t index) const;
  std::span<double> table_row(int level, std::uint64_t index);

  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }

  // L*T*F + decoder weights; independent of any sampling resolution.
  std::size_t parameter_count() const {
    return tables_.size() + decoder_.parameter_count();
  }

  FieldGradients make_gradients() const;

 private:
  GridConfig cfg_;
  std::vector<int> resolutions_;
  std::uint64_t seed_;
  std::vector<double> tables_;
  Decoder decoder_;
};

// Per-level corner lookup for one coordinate.
struct CornerSet {
  std::array<std::uint64_t, 4> index;  // hash table rows
  std::array<double, 4> weight;        // bilinear weights, sum to 1
};

CornerSet level_corners(const HashField& field, int level, Vec2 x);

// Concatenated per-level bilinear features, length L*F. Coordinates outside
// the unit square are clamped to its boundary.
void encode(const HashField& field, Vec2 x, std::span<double> out);
std::vector<double> encode(const HashField& field, Vec2 x);

// Decoder activations kept for the reverse pass.
struct DecodeTrace {
  std::vector<double> hidden_pre;  // before ReLU
  std::vector<double> hidden;      // after ReLU
  std::array<double, 4> output{};  // after the logistic squash
};

std::array<double, 4> decode(const HashField& field,
                             std::span<const double> features);
void decode(const HashField& field, std::span<const double> features,
            DecodeTrace& trace);

inline Vec2 cell_center(int i, int j, int h, int w) {
  return {(j + 0.5) / w, (i + 0.5) / h};
}

// Evaluates encode then decode at the h x w cell centers.
StructureGrid sample_structure(const HashField& field, int h, int w);

std::array<double, 4> evaluate(const HashField& field, Vec2 x);

// Reverse-mode gradients of sum(dS * S(coords)) with respect to the tables and
// decoder. Contributions are accumulated in coordinate order. Throws
// NonFiniteGradientError when dS holds NaN or Inf.
void backward_points(const HashField& field, std::span<const Vec2> coords,
                     std::span<const double> d_outputs, FieldGradients& grads);

// Same as backward_points over the h x w cell centers in row-major order.
// dS must be an h x w x 4 raster.
FieldGradients backward(const HashField& field, const StructureGrid& dS);
void backward(const HashField& field, const StructureGrid& dS,
              FieldGradients& grads);

// Versioned little-endian checkpoint.
void save_checkpoint(const HashField& field, const std::filesystem::path& path);
HashField load_checkpoint(const std::filesystem::path& path);

}  // namespace styletopo::field
