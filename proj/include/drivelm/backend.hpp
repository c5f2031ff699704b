#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "drivelm/camera.hpp"

namespace drivelm {

/// One generation call against a vision-language model.
struct BackendRequest {
  std::string prompt;
  std::string image_path;
  int max_new_tokens = 512;
  double temperature = 0.0;
  std::string system_id;
};

struct BackendResponse {
  std::string text;
  std::string model;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, int status, bool transient)
      : Error(message), status_(status), transient_(transient) {}

  // HTTP status, 0 when the request never got a response.
  int status() const { return status_; }
  bool transient() const { return transient_; }

 private:
  int status_;
  bool transient_;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual BackendResponse generate(const BackendRequest& request) = 0;
};

// Wire contract: POST {base_url}/v1/generate with
// {prompt, image | image_path, max_new_tokens, temperature, system_id};
// 200 -> {text, model}, otherwise {error}.
inline constexpr const char* kGeneratePath = "/v1/generate";

/// Request body. With `inline_image` the file is sent base64-encoded under
/// "image" instead of its path.
nlohmann::json encode_request(const BackendRequest& request, bool inline_image = false);
BackendRequest decode_request(const nlohmann::json& body);
BackendResponse decode_response(int status, const std::string& body);

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POSTs a JSON body to base_url + path. Throws BackendError (status 0) when
/// no response arrives.
HttpResponse post_json(const std::string& base_url, const std::string& path, const std::string& body,
                       std::chrono::milliseconds timeout);

struct HttpBackendOptions {
  std::string base_url;
  std::chrono::milliseconds timeout{60000};
  bool inline_images = false;
};

class HttpBackend : public VlmBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  BackendResponse generate(const BackendRequest& request) override;

 private:
  HttpBackendOptions options_;
};

/// Takes a serialized request body, returns (status, response body).
using WireHandler = std::function<HttpResponse(const std::string& body)>;

/// Runs the full wire encoding in process: request JSON is serialized,
/// handed to `handler`, and the reply decoded exactly as over HTTP.
class InProcessBackend : public VlmBackend {
 public:
  explicit InProcessBackend(WireHandler handler) : handler_(std::move(handler)) {}
  BackendResponse generate(const BackendRequest& request) override;

 private:
  WireHandler handler_;
};

/// The sentence holding the prompt's last question mark (or its last
/// sentence), with the "USER: <image>" / "ASSISTANT:" frame removed.
std::string final_question_sentence(std::string_view prompt);

/// Deterministic stub: "[<system_id>:<digest>] <final question sentence>".
WireHandler echo_handler();

/// Deterministic stub that answers like a model would: a short description
/// for key-object questions, an option letter for enumerated options,
/// "Yes."/"No." for auxiliary-verb questions, echo otherwise. Choices depend on a digest of
/// (prompt, system_id).
WireHandler choice_handler();

struct BackendOptions {
  // http://host:port[/prefix], or stub://echo / stub://choice.
  std::string base_url;
  std::chrono::milliseconds timeout{60000};
  bool inline_images = false;
};

std::unique_ptr<VlmBackend> make_backend(const BackendOptions& options);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;
};

/// Retries transient failures with exponential backoff. `attempts_used`
/// receives the number of calls made.
BackendResponse generate_with_retry(VlmBackend& backend, const BackendRequest& request,
                                    const RetryPolicy& policy, int* attempts_used = nullptr);

}  // namespace drivelm
