#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "causalkg/error.hpp"

namespace causalkg {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Blocking POST. Implementations throw RemoteError(kTimeout) when the request
// does not complete, including connection failures.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                            double timeout_s) = 0;
};

// cpp-httplib backed transport (http and https).
std::shared_ptr<HttpTransport> make_http_transport();

// An OpenAI-style service endpoint.
struct RemoteEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  double timeout_s = 30.0;
  int max_retries = 2;
};

// LLM_API_BASE, when set, replaces the configured base URL.
std::string effective_base_url(const std::string& configured);

// Content-Type plus "Authorization: Bearer $LLM_API_KEY" when the variable is set.
HttpHeaders json_request_headers();

/// POSTs `body` to base_url + path, retrying up to endpoint.max_retries times
/// on timeouts, 429 and 5xx. `parse` turns a 200 body into the result and
/// throws RemoteError(kUnparseableResponse) on bad payloads, which is also
/// retried.
template <typename Parse>
auto post_json_with_retries(HttpTransport& http, const RemoteEndpoint& endpoint, const std::string& path,
                            const std::string& body, Parse parse) -> decltype(parse(std::string())) {
  const std::string url = effective_base_url(endpoint.base_url) + path;
  const HttpHeaders headers = json_request_headers();
  for (int attempt = 0;; ++attempt) {
    try {
      HttpResponse response = http.post(url, body, headers, endpoint.timeout_s);
      if (response.status != 200) {
        throw RemoteError(RemoteError::Reason::kHttpStatus,
                          "POST " + url + " returned " + std::to_string(response.status), response.status);
      }
      return parse(response.body);
    } catch (const RemoteError& e) {
      const bool client_error = e.reason() == RemoteError::Reason::kHttpStatus && e.status() >= 400 &&
                                e.status() < 500 && e.status() != 429;
      if (client_error || attempt >= endpoint.max_retries) throw;
    }
  }
}

struct ChatMessage {
  std::string role;
  std::string content;
};

// JSON body {model, temperature, messages}.
std::string chat_request_body(const RemoteEndpoint& endpoint, const std::vector<ChatMessage>& messages,
                              double temperature);

// choices[0].message.content of a chat-completions response; throws
// RemoteError(kUnparseableResponse).
std::string parse_chat_content(const std::string& raw);

// POST {base}/chat/completions and return choices[0].message.content.
std::string chat_completion(HttpTransport& http, const RemoteEndpoint& endpoint,
                            const std::vector<ChatMessage>& messages, double temperature = 0.0);

}  // namespace causalkg
