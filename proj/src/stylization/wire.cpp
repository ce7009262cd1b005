#include "styletopo/stylization/wire.hpp"

#include <bit>
#include <cstring>

#include <openssl/evp.h>

#include "styletopo/errors.hpp"
#include "styletopo/json_util.hpp"

namespace styletopo::stylization::wire {

static_assert(std::endian::native == std::endian::little, "wire packing assumes a little-endian host");

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4", 1);
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ParseError("base64: invalid character", 1);
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string pack_floats(const std::vector<float>& values) {
  std::string out(values.size() * sizeof(float), '\0');
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<float> unpack_floats(std::string_view bytes) {
  if (bytes.size() % sizeof(float) != 0) throw ParseError("float array: byte count is not a multiple of 4", 1);
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

const char* content_type(Encoding enc) { return enc == Encoding::Json ? kJsonContentType : kRawContentType; }

namespace {

std::size_t shape_count(const std::array<std::uint32_t, 4>& shape) {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string_view rest() {
    auto s = data_.substr(pos_);
    pos_ = data_.size();
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("raw message truncated", 1);
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, std::string_view magic) {
  if (r.take(4) != magic) throw ParseError("raw message: bad magic, expected " + std::string(magic), 1);
  const auto version = r.get<std::uint32_t>();
  if (version != kProtocolVersion) {
    throw ParseError("raw message: protocol version " + std::to_string(version) + " is not supported", 1);
  }
}

std::array<std::uint32_t, 4> read_shape(Reader& r) {
  std::array<std::uint32_t, 4> s{};
  for (auto& d : s) d = r.get<std::uint32_t>();
  return s;
}

std::array<std::uint32_t, 4> json_shape(const json_util::Json& j) {
  const auto v = json_util::require<std::vector<std::uint32_t>>(j, "shape", "wire");
  if (v.size() != 4) throw ParseError("wire: shape must have 4 entries", 1);
  return {v[0], v[1], v[2], v[3]};
}

void check_json_header(const json_util::Json& j) {
  const auto version = json_util::get_or<std::uint32_t>(j, "protocol_version", kProtocolVersion, "wire");
  if (version != kProtocolVersion) {
    throw ParseError("wire: protocol version " + std::to_string(version) + " is not supported", 1);
  }
  const auto enc = json_util::get_or<std::string>(j, "encoding", "base64", "wire");
  if (enc != "base64") throw ParseError("wire: unsupported encoding \"" + enc + "\"", 1);
}

void check_count(const std::array<std::uint32_t, 4>& shape, std::size_t n, const char* what) {
  if (shape_count(shape) != n) {
    throw ShapeMismatchError(std::string("wire: ") + what + " hold " + std::to_string(n) + " floats, shape implies " +
                             std::to_string(shape_count(shape)));
  }
}

}  // namespace

std::string encode_request(const StyleRequest& req, Encoding enc) {
  check_count(req.shape, req.images.size(), "images");
  if (enc == Encoding::Json) {
    json_util::Json j;
    j["protocol_version"] = kProtocolVersion;
    j["prompt"] = req.prompt;
    j["shape"] = req.shape;
    j["encoding"] = "base64";
    j["images"] = base64_encode(pack_floats(req.images));
    return j.dump();
  }
  std::string out = "STYQ";
  put(out, kProtocolVersion);
  put(out, static_cast<std::uint32_t>(req.prompt.size()));
  out += req.prompt;
  for (std::uint32_t d : req.shape) put(out, d);
  out += pack_floats(req.images);
  return out;
}

StyleRequest decode_request(std::string_view body, Encoding enc) {
  StyleRequest req;
  if (enc == Encoding::Json) {
    const auto j = json_util::parse(body);
    json_util::reject_unknown_keys(j, {"protocol_version", "prompt", "shape", "encoding", "images"}, "wire request");
    check_json_header(j);
    req.prompt = json_util::require<std::string>(j, "prompt", "wire request");
    req.shape = json_shape(j);
    req.images = unpack_floats(base64_decode(json_util::require<std::string>(j, "images", "wire request")));
  } else {
    Reader r(body);
    check_magic(r, "STYQ");
    const auto len = r.get<std::uint32_t>();
    req.prompt = std::string(r.take(len));
    req.shape = read_shape(r);
    req.images = unpack_floats(r.rest());
  }
  check_count(req.shape, req.images.size(), "images");
  return req;
}

std::string encode_response(const StyleResponse& resp, Encoding enc) {
  check_count(resp.shape, resp.grads.size(), "grads");
  if (enc == Encoding::Json) {
    json_util::Json j;
    j["protocol_version"] = kProtocolVersion;
    j["loss"] = resp.loss;
    j["shape"] = resp.shape;
    j["encoding"] = "base64";
    j["grads"] = base64_encode(pack_floats(resp.grads));
    return j.dump();
  }
  std::string out = "STYR";
  put(out, kProtocolVersion);
  put(out, resp.loss);
  for (std::uint32_t d : resp.shape) put(out, d);
  out += pack_floats(resp.grads);
  return out;
}

StyleResponse decode_response(std::string_view body, Encoding enc) {
  StyleResponse resp;
  if (enc == Encoding::Json) {
    const auto j = json_util::parse(body);
    json_util::reject_unknown_keys(j, {"protocol_version", "loss", "shape", "encoding", "grads"}, "wire response");
    check_json_header(j);
    resp.loss = json_util::require<double>(j, "loss", "wire response");
    resp.shape = json_shape(j);
    resp.grads = unpack_floats(base64_decode(json_util::require<std::string>(j, "grads", "wire response")));
  } else {
    Reader r(body);
    check_magic(r, "STYR");
    resp.loss = r.get<double>();
    resp.shape = read_shape(r);
    resp.grads = unpack_floats(r.rest());
  }
  check_count(resp.shape, resp.grads.size(), "grads");
  return resp;
}

}  // namespace styletopo::stylization::wire
