#include "styletopo/stylization/backend.hpp"

#include <cmath>

#include <httplib.h>

#include "styletopo/json_util.hpp"

namespace styletopo::stylization {

StyleEval AnalyticStub::evaluate(const ImageBatch& images, const std::string& /*prompt*/) {
  StyleEval out;
  out.grads = ImageBatch(images.count, images.height, images.width);
  const double n = static_cast<double>(images.data.size());
  if (images.data.empty()) throw ShapeMismatchError("stub backend: empty batch");
  double sum = 0.0;
  for (std::size_t k = 0; k < images.data.size(); ++k) {
    const double d = images.data[k] - target_[k % 3];
    sum += d * d;
    out.grads.data[k] = 2.0 * d / n;
  }
  out.loss = sum / n - 1.0;
  return out;
}

struct RemoteClip::Impl {
  explicit Impl(const RemoteOptions& o) : client(o.url) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(o.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(o.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
  }
  httplib::Client client;
};

RemoteClip::RemoteClip(RemoteOptions opts) : opts_(std::move(opts)) {
  if (opts_.retries < 0) throw ValidationError("remote backend: retries must be >= 0");
  try {
    impl_ = std::make_unique<Impl>(opts_);
  } catch (const std::exception& e) {
    throw ValidationError("remote backend: bad url \"" + opts_.url + "\": " + e.what());
  }
  if (!impl_->client.is_valid()) throw ValidationError("remote backend: bad url \"" + opts_.url + "\"");
}

RemoteClip::~RemoteClip() = default;

HealthInfo RemoteClip::health() {
  auto res = impl_->client.Get(opts_.health_path);
  if (!res) {
    throw BackendUnavailableError("style backend at " + opts_.url + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailableError("style backend health check returned HTTP " + std::to_string(res->status));
  }
  const auto j = json_util::parse(res->body);
  HealthInfo info;
  info.protocol_version = json_util::require<std::uint32_t>(j, "protocol_version", "health");
  info.model_hash = json_util::get_or<std::string>(j, "model_hash", "", "health");
  return info;
}

StyleEval RemoteClip::evaluate(const ImageBatch& images, const std::string& prompt) {
  wire::StyleRequest req;
  req.prompt = prompt;
  req.shape = {static_cast<std::uint32_t>(images.count), static_cast<std::uint32_t>(images.height),
               static_cast<std::uint32_t>(images.width), 3u};
  req.images.assign(images.data.begin(), images.data.end());
  const std::string body = wire::encode_request(req, opts_.encoding);

  httplib::Result res;
  for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
    res = impl_->client.Post(opts_.style_path, body, wire::content_type(opts_.encoding));
    if (res && res->status < 500) break;
  }
  if (!res) {
    throw BackendUnavailableError("style backend at " + opts_.url + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw BackendUnavailableError("style backend returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error("style backend rejected the request (HTTP " + std::to_string(res->status) + "): " + res->body);
  }
  const auto enc = res->get_header_value("Content-Type").rfind(wire::kRawContentType, 0) == 0 ? wire::Encoding::Raw
                                                                                               : wire::Encoding::Json;
  const wire::StyleResponse resp = wire::decode_response(res->body, enc);
  if (resp.shape != req.shape) {
    throw ShapeMismatchError("style backend returned gradients of shape " + std::to_string(resp.shape[0]) + "x" +
                             std::to_string(resp.shape[1]) + "x" + std::to_string(resp.shape[2]) + "x" +
                             std::to_string(resp.shape[3]) + " for a " + std::to_string(req.shape[0]) + "x" +
                             std::to_string(req.shape[1]) + "x" + std::to_string(req.shape[2]) + "x3 batch");
  }
  StyleEval out;
  out.loss = resp.loss;
  out.grads = ImageBatch(images.count, images.height, images.width);
  out.grads.data.assign(resp.grads.begin(), resp.grads.end());
  return out;
}

SemanticResult semantic_loss(const Image& I, const AugmentSpec& spec, const std::string& prompt,
                             StyleBackend& backend) {
  const ImageBatch batch = augment(I, spec);
  StyleEval ev = backend.evaluate(batch, prompt);
  if (ev.grads.count != batch.count || ev.grads.height != batch.height || ev.grads.width != batch.width ||
      ev.grads.data.size() != batch.data.size()) {
    throw ShapeMismatchError("style backend \"" + backend.name() + "\" returned a gradient batch of the wrong shape");
  }
  if (!std::isfinite(ev.loss)) throw NonFiniteGradientError("semantic loss: backend returned a non-finite loss");
  for (double g : ev.grads.data) {
    if (!std::isfinite(g)) throw NonFiniteGradientError("semantic loss: backend returned non-finite gradients");
  }
  return {ev.loss, augment_transpose(ev.grads, spec)};
}

}  // namespace styletopo::stylization
