#pragma once

#include <chrono>
#include <string>

#include "medpipe/backend.hpp"

namespace medpipe {

struct HttpBackendConfig {
  std::string api_base;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{300};

  /// Reads M3_API_BASE, M3_API_KEY and M3_MODEL. A missing base URL or model
  /// is a configuration error.
  static HttpBackendConfig from_env();
};

/// Builds the chat-completion request body {model, messages, tools}.
nlohmann::json build_chat_request(const std::string& model, std::span<const Message> history,
                                  const nlohmann::json& tools);

/// Maps the first choice of a chat-completion response.
CompletionResult parse_chat_response(const nlohmann::json& body);

/// POSTs to <api_base>/chat/completions. Transport failures and 5xx replies
/// are retried with exponential backoff; other HTTP errors fail at once.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpBackendConfig config_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // path part of api_base, without trailing slash
};

}  // namespace medpipe
