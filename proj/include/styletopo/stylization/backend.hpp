#pragma once
// Style backends score a batch of augmented images against a prompt and
// return per-pixel gradients of the loss.

#include <array>
#include <chrono>
#include <memory>
#include <string>

#include "styletopo/stylization/augment.hpp"
#include "styletopo/stylization/compose.hpp"
#include "styletopo/stylization/wire.hpp"

namespace styletopo::stylization {

struct StyleEval {
  double loss = 0.0;
  ImageBatch grads;  // same shape as the submitted batch
};

class StyleBackend {
 public:
  virtual ~StyleBackend() = default;
  virtual StyleEval evaluate(const ImageBatch& images, const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

// L = mean((I - c)^2) - 1 over every channel value; the prompt is ignored.
class AnalyticStub final : public StyleBackend {
 public:
  explicit AnalyticStub(std::array<double, 3> target) : target_(target) {}
  StyleEval evaluate(const ImageBatch& images, const std::string& prompt) override;
  std::string name() const override { return "stub"; }
  const std::array<double, 3>& target() const { return target_; }

 private:
  std::array<double, 3> target_;
};

struct RemoteOptions {
  std::string url = "http://127.0.0.1:8765";
  std::string style_path = "/style";
  std::string health_path = "/health";
  wire::Encoding encoding = wire::Encoding::Json;
  std::chrono::milliseconds timeout{120000};
  int retries = 2;  // extra attempts on transport failure
};

struct HealthInfo {
  std::uint32_t protocol_version = 0;
  std::string model_hash;
};

// HTTP client for a style service. Transport failures and 5xx replies raise
// BackendUnavailableError; a reply whose shape differs from the request
// raises ShapeMismatchError.
class RemoteClip final : public StyleBackend {
 public:
  explicit RemoteClip(RemoteOptions opts);
  ~RemoteClip() override;
  StyleEval evaluate(const ImageBatch& images, const std::string& prompt) override;
  std::string name() const override { return "remote"; }
  HealthInfo health();

 private:
  struct Impl;
  RemoteOptions opts_;
  std::unique_ptr<Impl> impl_;
};

struct SemanticResult {
  double loss = 0.0;
  Image gradient;  // dL/dI at full resolution
};

// Augments I with the recorded items, queries the backend, and maps the
// returned gradients back through the augmentation transpose.
SemanticResult semantic_loss(const Image& I, const AugmentSpec& spec, const std::string& prompt,
                             StyleBackend& backend);

}  // namespace styletopo::stylization
