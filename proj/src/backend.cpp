#include "drivelm/backend.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "drivelm/dataset.hpp"
#include "drivelm/text.hpp"
#include "http_internal.hpp"

namespace drivelm {
namespace {

bool is_transient_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("cannot read image " + path, 0, false);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string strip_prompt_frame(std::string_view prompt) {
  std::string text = trim(prompt);
  constexpr std::string_view kUser = "USER: <image>";
  constexpr std::string_view kAssistant = "ASSISTANT:";
  if (text.rfind(kUser, 0) == 0) text = trim(std::string_view(text).substr(kUser.size()));
  if (text.size() >= kAssistant.size() &&
      text.compare(text.size() - kAssistant.size(), kAssistant.size(), kAssistant) == 0) {
    text = trim(std::string_view(text).substr(0, text.size() - kAssistant.size()));
  }
  return text;
}

HttpResponse json_reply(const std::string& text, const std::string& model) {
  return {200, nlohmann::json{{"text", text}, {"model", model}}.dump()};
}

HttpResponse error_reply(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump()};
}

bool has_options(std::string_view text) {
  return text.find("A. ") != std::string_view::npos && text.find(" B. ") != std::string_view::npos;
}

}  // namespace

nlohmann::json encode_request(const BackendRequest& request, bool inline_image) {
  nlohmann::json body = {{"prompt", request.prompt},
                         {"max_new_tokens", request.max_new_tokens},
                         {"temperature", request.temperature},
                         {"system_id", request.system_id}};
  if (inline_image) {
    body["image"] = httplib_base64(read_file(request.image_path));
  } else {
    body["image_path"] = request.image_path;
  }
  return body;
}

BackendRequest decode_request(const nlohmann::json& body) {
  if (!body.is_object()) throw BackendError("request body must be a JSON object", 400, false);
  BackendRequest request;
  try {
    request.prompt = body.at("prompt").get<std::string>();
    if (body.contains("image_path")) request.image_path = body["image_path"].get<std::string>();
    if (!body.contains("image_path") && !body.contains("image")) {
      throw BackendError("request needs image or image_path", 400, false);
    }
    request.max_new_tokens = body.at("max_new_tokens").get<int>();
    request.temperature = body.at("temperature").get<double>();
    request.system_id = body.at("system_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed request: ") + e.what(), 400, false);
  }
  if (request.max_new_tokens < 1) throw BackendError("max_new_tokens must be >= 1", 400, false);
  if (request.temperature < 0.0) throw BackendError("temperature must be >= 0", 400, false);
  return request;
}

BackendResponse decode_response(int status, const std::string& body) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw BackendError("backend returned non-JSON body (status " + std::to_string(status) + ")",
                       status, is_transient_status(status));
  }
  if (status != 200) {
    std::string message = parsed.is_object() && parsed.contains("error") && parsed["error"].is_string()
                              ? parsed["error"].get<std::string>()
                              : body;
    throw BackendError("backend status " + std::to_string(status) + ": " + message, status,
                       is_transient_status(status));
  }
  if (!parsed.is_object() || !parsed.contains("text") || !parsed["text"].is_string()) {
    throw BackendError("backend response lacks a text field", status, false);
  }
  BackendResponse response;
  response.text = parsed["text"].get<std::string>();
  if (parsed.contains("model") && parsed["model"].is_string()) {
    response.model = parsed["model"].get<std::string>();
  }
  return response;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {}

BackendResponse HttpBackend::generate(const BackendRequest& request) {
  const std::string body = encode_request(request, options_.inline_images).dump();
  HttpResponse reply = post_json(options_.base_url, kGeneratePath, body, options_.timeout);
  return decode_response(reply.status, reply.body);
}

BackendResponse InProcessBackend::generate(const BackendRequest& request) {
  HttpResponse reply = handler_(encode_request(request).dump());
  return decode_response(reply.status, reply.body);
}

std::string final_question_sentence(std::string_view prompt) {
  const std::string text = strip_prompt_frame(prompt);
  std::size_t end = text.rfind('?');
  end = end == std::string::npos ? text.size() : end + 1;
  std::size_t start = 0;
  for (std::size_t i = end - (end > 0 ? 1 : 0); i-- > 0;) {
    const char c = text[i];
    if ((c == '.' || c == '?' || c == '!') && i + 1 < text.size() &&
        std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      start = i + 1;
      break;
    }
  }
  return trim(std::string_view(text).substr(start, end - start));
}

WireHandler echo_handler() {
  return [](const std::string& body) -> HttpResponse {
    try {
      const BackendRequest request = decode_request(nlohmann::json::parse(body));
      const std::string digest = hex64(fnv1a64(request.prompt + '\x1f' + request.system_id)).substr(0, 8);
      return json_reply("[" + request.system_id + ":" + digest + "] " +
                            final_question_sentence(request.prompt),
                        "stub-echo");
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, e.what());
    } catch (const BackendError& e) {
      return error_reply(e.status() == 0 ? 400 : e.status(), e.what());
    }
  };
}

WireHandler choice_handler() {
  return [](const std::string& body) -> HttpResponse {
    try {
      const BackendRequest request = decode_request(nlohmann::json::parse(body));
      const std::uint64_t digest = fnv1a64(request.prompt + '\x1f' + request.system_id);
      const std::string question = final_question_sentence(request.prompt);
      const std::string framed = strip_prompt_frame(request.prompt);
      if (const auto tags = extract_tags(framed);
          !tags.empty() && framed.find("represents the key object") != std::string::npos) {
        static constexpr std::array<std::string_view, 4> kNouns = {"a car", "a truck", "a pedestrian", "a cyclist"};
        static constexpr std::array<std::string_view, 3> kStates = {"moving", "stationary", "turning"};
        return json_reply(format_tag(tags.front()) + " is " + std::string(kNouns[digest % 4]) + ". It is " +
                              std::string(kStates[(digest / 4) % 3]) + ".",
                          "stub-choice");
      }
      if (has_options(framed)) {
        const char letter = static_cast<char>('A' + digest % 4);
        return json_reply(std::string(1, letter), "stub-choice");
      }
      static constexpr std::array<std::string_view, 10> kAux = {
          "is", "are", "was", "were", "do", "does", "did", "will", "would", "can"};
      std::size_t end = 0;
      while (end < question.size() && std::isalpha(static_cast<unsigned char>(question[end]))) ++end;
      const std::string first = to_lower(std::string_view(question).substr(0, end));
      for (auto aux : kAux) {
        if (first == aux) return json_reply(digest % 3 == 0 ? "No." : "Yes.", "stub-choice");
      }
      return json_reply(question, "stub-choice");
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, e.what());
    } catch (const BackendError& e) {
      return error_reply(e.status() == 0 ? 400 : e.status(), e.what());
    }
  };
}

std::unique_ptr<VlmBackend> make_backend(const BackendOptions& options) {
  if (options.base_url == "stub://echo") return std::make_unique<InProcessBackend>(echo_handler());
  if (options.base_url == "stub://choice") return std::make_unique<InProcessBackend>(choice_handler());
  if (options.base_url.rfind("http://", 0) == 0 || options.base_url.rfind("https://", 0) == 0) {
    return std::make_unique<HttpBackend>(
        HttpBackendOptions{options.base_url, options.timeout, options.inline_images});
  }
  throw Error("unsupported backend url '" + options.base_url + "'");
}

BackendResponse generate_with_retry(VlmBackend& backend, const BackendRequest& request,
                                    const RetryPolicy& policy, int* attempts_used) {
  const int attempts = std::max(1, policy.attempts);
  auto delay = std::chrono::duration<double, std::milli>(policy.base_delay);
  for (int attempt = 1;; ++attempt) {
    if (attempts_used) *attempts_used = attempt;
    try {
      return backend.generate(request);
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= attempts) throw;
      spdlog::warn("backend call failed (attempt {}/{}): {}", attempt, attempts, e.what());
    }
    std::this_thread::sleep_for(delay);
    delay *= policy.multiplier;
  }
}

}  // namespace drivelm
