#include "styletopo/field/hash_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "styletopo/errors.hpp"
#include "styletopo/simd/kernels.hpp"

namespace styletopo::field {

namespace {

constexpr double kLogitLimit = 36.0;

double squash(double z, bool& saturated) {
  saturated = std::abs(z) > kLogitLimit;
  const double zc = std::clamp(z, -kLogitLimit, kLogitLimit);
  return 1.0 / (1.0 + std::exp(-zc));
}

}  // namespace

void GridConfig::validate() const {
  if (levels < 2) throw ValidationError("grid: levels must be >= 2");
  if (table_size == 0 || !std::has_single_bit(table_size)) {
    throw ValidationError("grid: table_size must be a power of two");
  }
  if (features < 1) throw ValidationError("grid: features must be >= 1");
  if (min_resolution < 1) throw ValidationError("grid: min_resolution must be >= 1");
  if (max_resolution < min_resolution) {
    throw ValidationError("grid: max_resolution must be >= min_resolution");
  }
  if (hidden_width < 1) throw ValidationError("grid: hidden_width must be >= 1");
}

double GridConfig::growth() const {
  return std::exp((std::log(static_cast<double>(max_resolution)) -
                   std::log(static_cast<double>(min_resolution))) /
                  (levels - 1));
}

std::vector<int> level_resolutions(const GridConfig& cfg) {
  cfg.validate();
  const double b = cfg.growth();
  std::vector<int> out(static_cast<std::size_t>(cfg.levels));
  for (int l = 0; l < cfg.levels; ++l) {
    // exp/log round-off can land an exact power just below the integer
    const double n = cfg.min_resolution * std::pow(b, l);
    out[static_cast<std::size_t>(l)] = static_cast<int>(std::floor(n * (1.0 + 1e-12)));
  }
  out.front() = cfg.min_resolution;
  out.back() = std::min(out.back(), cfg.max_resolution);
  return out;
}

void FieldGradients::zero() {
  std::fill(d_tables.begin(), d_tables.end(), 0.0);
  for (auto* v : {&d_decoder.w1, &d_decoder.b1, &d_decoder.w2, &d_decoder.b2}) {
    std::fill(v->begin(), v->end(), 0.0);
  }
}

bool FieldGradients::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(d_tables) && finite(d_decoder.w1) && finite(d_decoder.b1) &&
         finite(d_decoder.w2) && finite(d_decoder.b2);
}

HashField::HashField(const GridConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), resolutions_(level_resolutions(cfg)), seed_(seed) {
  tables_.assign(static_cast<std::size_t>(cfg.levels) * cfg.table_size * cfg.features, 0.0);
  const auto in = static_cast<std::size_t>(cfg.feature_width());
  const auto hid = static_cast<std::size_t>(cfg.hidden_width);
  decoder_.w1.assign(hid * in, 0.0);
  decoder_.b1.assign(hid, 0.0);
  decoder_.w2.assign(kOutputChannels * hid, 0.0);
  decoder_.b2.assign(kOutputChannels, 0.0);
}

std::span<const double> HashField::table_row(int level, std::uint64_t index) const {
  const std::size_t off =
      (static_cast<std::size_t>(level) * cfg_.table_size + index) * cfg_.features;
  return std::span<const double>(tables_).subspan(off, static_cast<std::size_t>(cfg_.features));
}

std::span<double> HashField::table_row(int level, std::uint64_t index) {
  const std::size_t off =
      (static_cast<std::size_t>(level) * cfg_.table_size + index) * cfg_.features;
  return std::span<double>(tables_).subspan(off, static_cast<std::size_t>(cfg_.features));
}

FieldGradients HashField::make_gradients() const {
  FieldGradients g;
  g.d_tables.assign(tables_.size(), 0.0);
  g.d_decoder.w1.assign(decoder_.w1.size(), 0.0);
  g.d_decoder.b1.assign(decoder_.b1.size(), 0.0);
  g.d_decoder.w2.assign(decoder_.w2.size(), 0.0);
  g.d_decoder.b2.assign(decoder_.b2.size(), 0.0);
  return g;
}

CornerSet level_corners(const HashField& field, int level, Vec2 x) {
  const double n = field.resolutions()[static_cast<std::size_t>(level)];
  const double px = std::clamp(x.x, 0.0, 1.0) * n;
  const double py = std::clamp(x.y, 0.0, 1.0) * n;
  const double fx0 = std::floor(px);
  const double fy0 = std::floor(py);
  const double tx = px - fx0;
  const double ty = py - fy0;
  const auto x0 = static_cast<std::uint64_t>(fx0);
  const auto y0 = static_cast<std::uint64_t>(fy0);
  const std::uint64_t t = field.config().table_size;
  CornerSet c;
  c.index = {hash_index(x0, y0, t), hash_index(x0 + 1, y0, t),
             hash_index(x0, y0 + 1, t), hash_index(x0 + 1, y0 + 1, t)};
  c.weight = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty};
  return c;
}

void encode(const HashField& field, Vec2 x, std::span<double> out) {
  const GridConfig& cfg = field.config();
  const int f = cfg.features;
  if (out.size() != static_cast<std::size_t>(cfg.feature_width())) {
    throw DimensionError("encode: output span has wrong length");
  }
  for (int l = 0; l < cfg.levels; ++l) {
    const CornerSet c = level_corners(field, l, x);
    double* dst = out.data() + static_cast<std::size_t>(l) * f;
    for (int k = 0; k < f; ++k) dst[k] = 0.0;
    for (int corner = 0; corner < 4; ++corner) {
      const auto row = field.table_row(l, c.index[corner]);
      const double w = c.weight[corner];
      for (int k = 0; k < f; ++k) dst[k] += w * row[k];
    }
  }
}

std::vector<double> encode(const HashField& field, Vec2 x) {
  std::vector<double> out(static_cast<std::size_t>(field.config().feature_width()));
  encode(field, x, out);
  return out;
}

void decode(const HashField& field, std::span<const double> features, DecodeTrace& trace) {
  const GridConfig& cfg = field.config();
  const Decoder& d = field.decoder();
  const auto in = static_cast<std::size_t>(cfg.feature_width());
  const auto hid = static_cast<std::size_t>(cfg.hidden_width);
  if (features.size() != in) throw DimensionError("decode: feature length != L*F");
  const auto& k = simd::kernels();
  trace.hidden_pre.resize(hid);
  trace.hidden.resize(hid);
  k.affine(d.w1.data(), d.b1.data(), features.data(), trace.hidden_pre.data(), hid, in);
  for (std::size_t i = 0; i < hid; ++i) trace.hidden[i] = std::max(0.0, trace.hidden_pre[i]);
  std::array<double, 4> logits{};
  k.affine(d.w2.data(), d.b2.data(), trace.hidden.data(), logits.data(), kOutputChannels, hid);
  for (int c = 0; c < kOutputChannels; ++c) {
    bool sat = false;
    trace.output[static_cast<std::size_t>(c)] = squash(logits[static_cast<std::size_t>(c)], sat);
  }
}

std::array<double, 4> decode(const HashField& field, std::span<const double> features) {
  DecodeTrace trace;
  decode(field, features, trace);
  return trace.output;
}

std::array<double, 4> evaluate(const HashField& field, Vec2 x) {
  return decode(field, encode(field, x));
}

StructureGrid sample_structure(const HashField& field, int h, int w) {
  if (h < 1 || w < 1) throw DimensionError("sample_structure: h and w must be >= 1");
  StructureGrid s(h, w, kOutputChannels);
  std::vector<double> feat(static_cast<std::size_t>(field.config().feature_width()));
  DecodeTrace trace;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      encode(field, cell_center(i, j, h, w), feat);
      decode(field, feat, trace);
      for (int c = 0; c < kOutputChannels; ++c) s.at(i, j, c) = trace.output[static_cast<std::size_t>(c)];
    }
  }
  return s;
}

namespace {

// Reverse pass for a single coordinate; reuses the caller's scratch buffers.
struct BackwardScratch {
  std::vector<CornerSet> corners;
  std::vector<double> features;
  std::vector<double> d_hidden;
  std::vector<double> d_features;
  std::vector<double> logits;
  DecodeTrace trace;
};

void backward_one(const HashField& field, Vec2 x, const double* d_out,
                  FieldGradients& g, BackwardScratch& s) {
  const GridConfig& cfg = field.config();
  const Decoder& d = field.decoder();
  const int f = cfg.features;
  const auto in = static_cast<std::size_t>(cfg.feature_width());
  const auto hid = static_cast<std::size_t>(cfg.hidden_width);
  const auto& k = simd::kernels();

  s.features.assign(in, 0.0);
  for (int l = 0; l < cfg.levels; ++l) {
    s.corners[static_cast<std::size_t>(l)] = level_corners(field, l, x);
    const CornerSet& c = s.corners[static_cast<std::size_t>(l)];
    double* dst = s.features.data() + static_cast<std::size_t>(l) * f;
    for (int corner = 0; corner < 4; ++corner) {
      const auto row = field.table_row(l, c.index[corner]);
      for (int q = 0; q < f; ++q) dst[q] += c.weight[corner] * row[q];
    }
  }
  decode(field, s.features, s.trace);

  std::array<double, 4> d_logit{};
  k.affine(d.w2.data(), d.b2.data(), s.trace.hidden.data(), s.logits.data(), kOutputChannels, hid);
  bool any = false;
  for (std::size_t c = 0; c < kOutputChannels; ++c) {
    const double y = s.trace.output[c];
    const bool sat = std::abs(s.logits[c]) > kLogitLimit;
    d_logit[c] = sat ? 0.0 : d_out[c] * y * (1.0 - y);
    any |= d_logit[c] != 0.0;
  }
  if (!any) return;

  k.outer_accumulate(d_logit.data(), s.trace.hidden.data(), g.d_decoder.w2.data(), kOutputChannels, hid);
  for (std::size_t c = 0; c < kOutputChannels; ++c) g.d_decoder.b2[c] += d_logit[c];

  std::fill(s.d_hidden.begin(), s.d_hidden.end(), 0.0);
  for (std::size_t c = 0; c < kOutputChannels; ++c) {
    if (d_logit[c] != 0.0) k.axpy(d_logit[c], d.w2.data() + c * hid, s.d_hidden.data(), hid);
  }
  for (std::size_t i = 0; i < hid; ++i) {
    if (s.trace.hidden_pre[i] <= 0.0) s.d_hidden[i] = 0.0;
  }
  k.outer_accumulate(s.d_hidden.data(), s.features.data(), g.d_decoder.w1.data(), hid, in);
  k.axpy(1.0, s.d_hidden.data(), g.d_decoder.b1.data(), hid);

  std::fill(s.d_features.begin(), s.d_features.end(), 0.0);
  for (std::size_t i = 0; i < hid; ++i) {
    if (s.d_hidden[i] != 0.0) k.axpy(s.d_hidden[i], d.w1.data() + i * in, s.d_features.data(), in);
  }

  const std::uint64_t t = cfg.table_size;
  for (int l = 0; l < cfg.levels; ++l) {
    const CornerSet& c = s.corners[static_cast<std::size_t>(l)];
    const double* src = s.d_features.data() + static_cast<std::size_t>(l) * f;
    for (int corner = 0; corner < 4; ++corner) {
      double* row = g.d_tables.data() + (static_cast<std::size_t>(l) * t + c.index[corner]) * f;
      for (int q = 0; q < f; ++q) row[q] += c.weight[corner] * src[q];
    }
  }
}

BackwardScratch make_scratch(const HashField& field) {
  const GridConfig& cfg = field.config();
  BackwardScratch s;
  s.corners.resize(static_cast<std::size_t>(cfg.levels));
  s.d_hidden.resize(static_cast<std::size_t>(cfg.hidden_width));
  s.d_features.resize(static_cast<std::size_t>(cfg.feature_width()));
  s.logits.resize(kOutputChannels);
  return s;
}

void check_finite(std::span<const double> v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteGradientError(std::string(where) + ": non-finite incoming gradient");
  }
}

}  // namespace

void backward_points(const HashField& field, std::span<const Vec2> coords,
                     std::span<const double> d_outputs, FieldGradients& grads) {
  if (d_outputs.size() != coords.size() * kOutputChannels) {
    throw DimensionError("backward: dS length does not match sample count");
  }
  check_finite(d_outputs, "backward");
  BackwardScratch s = make_scratch(field);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    backward_one(field, coords[p], d_outputs.data() + p * kOutputChannels, grads, s);
  }
}

void backward(const HashField& field, const StructureGrid& dS, FieldGradients& grads) {
  if (dS.channels != kOutputChannels) throw DimensionError("backward: dS must have 4 channels");
  check_finite(dS.data, "backward");
  BackwardScratch s = make_scratch(field);
  for (int i = 0; i < dS.height; ++i) {
    for (int j = 0; j < dS.width; ++j) {
      const double* d = dS.data.data() + dS.offset(i, j);
      if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0 && d[3] == 0.0) continue;
      backward_one(field, cell_center(i, j, dS.height, dS.width), d, grads, s);
    }
  }
}

FieldGradients backward(const HashField& field, const StructureGrid& dS) {
  FieldGradients g = field.make_gradients();
  backward(field, dS, g);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'S', 'T', 'Y', 'T', 'F', 'L', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_doubles(std::ostream& os, std::span<const double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  } else {
    for (double x : v) put_le(os, x);
  }
}

void get_doubles(std::istream& is, std::span<double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()))) {
      throw IoError("checkpoint truncated");
    }
  } else {
    for (double& x : v) x = get_le<double>(is);
  }
}

}  // namespace

void save_checkpoint(const HashField& field, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  const GridConfig& c = field.config();
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.levels));
  put_le<std::uint64_t>(os, c.table_size);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.features));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.min_resolution));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.max_resolution));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.hidden_width));
  put_le<std::uint64_t>(os, field.seed());
  put_doubles(os, field.tables());
  const Decoder& d = field.decoder();
  put_doubles(os, d.w1);
  put_doubles(os, d.b1);
  put_doubles(os, d.w2);
  put_doubles(os, d.b2);
  if (!os) throw IoError("write failed: " + path.string());
}

HashField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint not found: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a field checkpoint: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  GridConfig c;
  c.levels = static_cast<int>(get_le<std::uint32_t>(is));
  c.table_size = get_le<std::uint64_t>(is);
  c.features = static_cast<int>(get_le<std::uint32_t>(is));
  c.min_resolution = static_cast<int>(get_le<std::uint32_t>(is));
  c.max_resolution = static_cast<int>(get_le<std::uint32_t>(is));
  c.hidden_width = static_cast<int>(get_le<std::uint32_t>(is));
  const auto seed = get_le<std::uint64_t>(is);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("corrupt checkpoint header (") + e.what() + "): " + path.string());
  }
  HashField field(c, seed);
  get_doubles(is, field.tables());
  Decoder& d = field.decoder();
  get_doubles(is, d.w1);
  get_doubles(is, d.b1);
  get_doubles(is, d.w2);
  get_doubles(is, d.b2);
  return field;
}

}  // namespace styletopo::field
