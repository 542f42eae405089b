#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "causalkg/http.hpp"

#include <cmath>
#include <cstdlib>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace causalkg {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw config_error("endpoint", "not an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                    double timeout_s) override {
    const SplitUrl target = split_url(url);
    httplib::Client client(target.origin);
    const auto sec = static_cast<time_t>(std::floor(timeout_s));
    const auto usec = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [name, value] : headers) {
      if (name == "Content-Type") {
        content_type = value;
      } else {
        h.emplace(name, value);
      }
    }
    auto result = client.Post(target.path, h, body, content_type);
    if (!result) {
      throw RemoteError(RemoteError::Reason::kTimeout, "POST " + url + ": " + httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

std::string effective_base_url(const std::string& configured) {
  std::string base = configured;
  if (const char* env = std::getenv("LLM_API_BASE"); env != nullptr && *env != '\0') base = env;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base;
}

HttpHeaders json_request_headers() {
  HttpHeaders headers = {{"Content-Type", "application/json"}};
  if (const char* key = std::getenv("LLM_API_KEY"); key != nullptr && *key != '\0') {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return headers;
}

std::string chat_request_body(const RemoteEndpoint& endpoint, const std::vector<ChatMessage>& messages,
                              double temperature) {
  nlohmann::json body = {{"model", endpoint.model}, {"temperature", temperature}, {"messages", nlohmann::json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return body.dump();
}

std::string parse_chat_content(const std::string& raw) {
  try {
    auto j = nlohmann::json::parse(raw);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw std::runtime_error("content is not a string");
    return content.get<std::string>();
  } catch (const std::exception& e) {
    throw RemoteError(RemoteError::Reason::kUnparseableResponse, std::string("chat completion: ") + e.what());
  }
}

std::string chat_completion(HttpTransport& http, const RemoteEndpoint& endpoint,
                            const std::vector<ChatMessage>& messages, double temperature) {
  return post_json_with_retries(http, endpoint, "/chat/completions", chat_request_body(endpoint, messages, temperature),
                                parse_chat_content);
}

}  // namespace causalkg
