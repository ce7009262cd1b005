#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>

#include "styletopo/errors.hpp"
#include "styletopo/stylization/backend.hpp"
#include "styletopo/stylization/wire.hpp"

using namespace styletopo;
using namespace styletopo::stylization;

namespace {

wire::StyleRequest sample_request() {
  wire::StyleRequest req;
  req.prompt = "golden, Baroque style";
  req.shape = {2, 3, 4, 3};
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  req.images.resize(2 * 3 * 4 * 3);
  for (float& v : req.images) v = u(rng);
  req.images[0] = -0.0f;
  req.images[1] = 1e-38f;
  return req;
}

// A stand-in for the style service: answers with the stub loss on a
// fixed target, or with a canned failure mode.
class FakeService {
 public:
  enum class Mode { Stub, ServerError, WrongShape };

  explicit FakeService(Mode mode) : mode_(mode) {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"protocol_version": 1, "model_hash": "fake"})", wire::kJsonContentType);
    });
    server_.Post("/style", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (mode_ == Mode::ServerError) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      const auto enc = req.get_header_value("Content-Type") == wire::kRawContentType ? wire::Encoding::Raw
                                                                                     : wire::Encoding::Json;
      const wire::StyleRequest in = wire::decode_request(req.body, enc);
      wire::StyleResponse out;
      out.shape = in.shape;
      out.grads.resize(in.images.size());
      if (mode_ == Mode::WrongShape) {
        out.shape[0] += 1;
        out.grads.resize(out.grads.size() + in.images.size() / in.shape[0]);
      }
      double sum = 0.0;
      const double n = static_cast<double>(in.images.size());
      for (std::size_t k = 0; k < in.images.size(); ++k) {
        const double d = in.images[k] - kTarget[k % 3];
        sum += d * d;
        out.grads[k] = static_cast<float>(2.0 * d / n);
      }
      out.loss = sum / n - 1.0;
      res.set_content(wire::encode_response(out, enc), wire::content_type(enc));
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }

  static constexpr double kTarget[3] = {0.83, 0.69, 0.22};

 private:
  Mode mode_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
};

ImageBatch sample_batch() {
  ImageBatch b(3, 5, 5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // float-representable values so the wire round trip is exact
  for (double& v : b.data) v = static_cast<float>(u(rng));
  return b;
}

}  // namespace

TEST(Base64, KnownVectorsAndRoundTrip) {
  EXPECT_EQ(wire::base64_encode(""), "");
  EXPECT_EQ(wire::base64_encode("f"), "Zg==");
  EXPECT_EQ(wire::base64_encode("fo"), "Zm8=");
  EXPECT_EQ(wire::base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(wire::base64_decode("Zm9vYg=="), "foob");
  std::string bytes;
  for (int k = 0; k < 256; ++k) bytes.push_back(static_cast<char>(k));
  EXPECT_EQ(wire::base64_decode(wire::base64_encode(bytes)), bytes);
  EXPECT_THROW(wire::base64_decode("Zm9v!!"), ParseError);
  EXPECT_THROW(wire::base64_decode("Zm9"), ParseError);
}

TEST(WireFormat, FloatsPackLittleEndian) {
  const std::string b = wire::pack_floats({1.0f});
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(static_cast<unsigned char>(b[3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(b[2]), 0x80);
  EXPECT_THROW(wire::unpack_floats("abc"), ParseError);
}

TEST(WireFormat, RequestRoundTripIsBitExactInBothEncodings) {
  const auto req = sample_request();
  for (auto enc : {wire::Encoding::Json, wire::Encoding::Raw}) {
    const std::string body = wire::encode_request(req, enc);
    const auto back = wire::decode_request(body, enc);
    EXPECT_EQ(back.prompt, req.prompt);
    EXPECT_EQ(back.shape, req.shape);
    ASSERT_EQ(back.images.size(), req.images.size());
    EXPECT_EQ(wire::pack_floats(back.images), wire::pack_floats(req.images));
    EXPECT_EQ(wire::encode_request(back, enc), body);
  }
  EXPECT_EQ(wire::encode_request(req, wire::Encoding::Raw).substr(0, 4), "STYQ");
}

TEST(WireFormat, ResponseRoundTripAndErrors) {
  wire::StyleResponse r;
  r.loss = -0.123456789012345;
  r.shape = {1, 1, 2, 3};
  r.grads = {1, 2, 3, 4, 5, 6};
  for (auto enc : {wire::Encoding::Json, wire::Encoding::Raw}) {
    const auto back = wire::decode_response(wire::encode_response(r, enc), enc);
    EXPECT_EQ(back.loss, r.loss);
    EXPECT_EQ(back.shape, r.shape);
    EXPECT_EQ(back.grads, r.grads);
  }
  std::string truncated = wire::encode_response(r, wire::Encoding::Raw);
  truncated.resize(truncated.size() - 4);  // payload now disagrees with the shape
  EXPECT_THROW(wire::decode_response(truncated, wire::Encoding::Raw), ShapeMismatchError);
  r.shape = {1, 1, 2, 2};
  EXPECT_THROW(wire::encode_response(r, wire::Encoding::Raw), ShapeMismatchError);
  EXPECT_THROW(wire::decode_response("STYQ garbage", wire::Encoding::Raw), ParseError);
  EXPECT_THROW(wire::decode_response("{\"loss\": 1", wire::Encoding::Json), ParseError);
  EXPECT_THROW(wire::decode_request(R"({"protocol_version": 99, "prompt": "", "shape": [0,0,0,3], "images": ""})",
                                    wire::Encoding::Json),
               ParseError);
}

TEST(RemoteClient, MatchesLocalStubOverBothEncodings) {
  FakeService svc(FakeService::Mode::Stub);
  const ImageBatch b = sample_batch();
  AnalyticStub local({0.83, 0.69, 0.22});
  const StyleEval ref = local.evaluate(b, "gold");
  for (auto enc : {wire::Encoding::Json, wire::Encoding::Raw}) {
    RemoteOptions opts;
    opts.url = svc.url();
    opts.encoding = enc;
    RemoteClip client(opts);
    EXPECT_EQ(client.health().protocol_version, 1u);
    const StyleEval ev = client.evaluate(b, "gold");
    EXPECT_NEAR(ev.loss, ref.loss, 1e-12);
    ASSERT_EQ(ev.grads.data.size(), ref.grads.data.size());
    for (std::size_t k = 0; k < ev.grads.data.size(); ++k) EXPECT_NEAR(ev.grads.data[k], ref.grads.data[k], 1e-8);
  }
}

TEST(RemoteClient, ServerErrorsAreRetriedThenReported) {
  FakeService svc(FakeService::Mode::ServerError);
  RemoteOptions opts;
  opts.url = svc.url();
  opts.retries = 2;
  RemoteClip client(opts);
  EXPECT_THROW(client.evaluate(sample_batch(), "gold"), BackendUnavailableError);
  EXPECT_EQ(svc.requests(), 3);
}

TEST(RemoteClient, ShapeMismatchIsDetected) {
  FakeService svc(FakeService::Mode::WrongShape);
  RemoteOptions opts;
  opts.url = svc.url();
  RemoteClip client(opts);
  EXPECT_THROW(client.evaluate(sample_batch(), "gold"), ShapeMismatchError);
}

TEST(RemoteClient, UnreachableServiceIsABackendError) {
  // bind a port, then release it so nothing listens there
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  RemoteOptions opts;
  opts.url = "http://127.0.0.1:" + std::to_string(port);
  opts.timeout = std::chrono::milliseconds(500);
  opts.retries = 0;
  RemoteClip client(opts);
  EXPECT_THROW(client.evaluate(sample_batch(), "gold"), BackendUnavailableError);
  EXPECT_THROW(client.health(), BackendUnavailableError);
}
