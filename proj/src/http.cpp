#include <httplib.h>

#include "drivelm/backend.hpp"
#include "http_internal.hpp"

namespace drivelm {

std::string httplib_base64(const std::string& data) { return httplib::detail::base64_encode(data); }

HttpResponse post_json(const std::string& base_url, const std::string& path, const std::string& body,
                       std::chrono::milliseconds timeout) {
  // httplib clients take scheme://host:port; anything after is a path prefix.
  std::string origin = base_url;
  std::string prefix;
  if (auto scheme = base_url.find("://"); scheme != std::string::npos) {
    if (auto slash = base_url.find('/', scheme + 3); slash != std::string::npos) {
      origin = base_url.substr(0, slash);
      prefix = base_url.substr(slash);
      while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
  }
  httplib::Client client(origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  std::string target = prefix + path;
  if (target.empty()) target = "/";
  auto result = client.Post(target, body, "application/json");
  if (!result) {
    throw BackendError("request to " + base_url + path + " failed: " + httplib::to_string(result.error()),
                       0, true);
  }
  return {result->status, result->body};
}

}  // namespace drivelm
