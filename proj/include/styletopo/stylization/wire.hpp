#pragma once
// Style-backend wire format. Images and gradients travel as B x H x W x 3
// little-endian float32 arrays, either base64 inside a JSON envelope
// (Content-Type application/json) or as a raw binary body
// (Content-Type application/octet-stream).
//
// JSON request:  {"protocol_version": 1, "prompt": "...", "shape": [B, H, W, 3],
//                 "encoding": "base64", "images": "<base64>"}
// JSON response: {"protocol_version": 1, "loss": <float64>, "shape": [B, H, W, 3],
//                 "encoding": "base64", "grads": "<base64>"}
// Raw request:   "STYQ" u32 version, u32 prompt bytes, prompt, u32 B, H, W, C, f32 data
// Raw response:  "STYR" u32 version, f64 loss, u32 B, H, W, C, f32 data
// Health (GET):  {"protocol_version": 1, "model_hash": "..."}

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace styletopo::stylization::wire {

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr const char* kJsonContentType = "application/json";
inline constexpr const char* kRawContentType = "application/octet-stream";

enum class Encoding { Json, Raw };

struct StyleRequest {
  std::string prompt;
  std::array<std::uint32_t, 4> shape{};  // B, H, W, C
  std::vector<float> images;
};

struct StyleResponse {
  double loss = 0.0;
  std::array<std::uint32_t, 4> shape{};
  std::vector<float> grads;
};

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);  // throws ParseError on malformed input

// Little-endian float32 packing.
std::string pack_floats(const std::vector<float>& values);
std::vector<float> unpack_floats(std::string_view bytes);

std::string encode_request(const StyleRequest& req, Encoding enc);
StyleRequest decode_request(std::string_view body, Encoding enc);
std::string encode_response(const StyleResponse& resp, Encoding enc);
StyleResponse decode_response(std::string_view body, Encoding enc);

const char* content_type(Encoding enc);

}  // namespace styletopo::stylization::wire
