#include "medpipe/http_backend.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "medpipe/error.hpp"

namespace medpipe {

HttpBackendConfig HttpBackendConfig::from_env() {
  auto env = [](const char* name) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::string();
  };
  HttpBackendConfig config;
  config.api_base = env("M3_API_BASE");
  config.api_key = env("M3_API_KEY");
  config.model = env("M3_MODEL");
  if (config.api_base.empty()) throw Error(ErrorCode::config, "M3_API_BASE is not set");
  if (config.model.empty()) throw Error(ErrorCode::config, "M3_MODEL is not set");
  return config;
}

nlohmann::json build_chat_request(const std::string& model, std::span<const Message> history,
                                  const nlohmann::json& tools) {
  auto messages = nlohmann::json::array();
  for (const auto& m : history) messages.push_back(to_wire(m));
  nlohmann::json body = {{"model", model}, {"messages", std::move(messages)}};
  if (tools.is_array() && !tools.empty()) body["tools"] = tools;
  return body;
}

CompletionResult parse_chat_response(const nlohmann::json& body) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::parse, "chat response has no choices");
  }
  const auto& choice = choices->front();
  if (!choice.contains("message")) throw Error(ErrorCode::parse, "chat response choice has no message");
  CompletionResult result;
  result.message = message_from_wire(choice.at("message"));
  result.message.role = Role::assistant;
  const auto reason = choice.value("finish_reason", std::string());
  if (!result.message.tool_calls.empty()) {
    result.finish = FinishKind::tool_calls;
  } else if (reason == "length") {
    result.finish = FinishKind::length;
  } else {
    result.finish = FinishKind::text;
  }
  if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
    result.usage = TokenUsage{usage->value("prompt_tokens", 0LL),
                              usage->value("completion_tokens", 0LL)};
  }
  return result;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto& base = config_.api_base;
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::config, fmt::format("API base URL \"{}\" has no scheme", base));
  }
  const auto path_start = base.find('/', scheme_end + 3);
  origin_ = base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? std::string() : base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

CompletionResult HttpBackend::complete(const CompletionRequest& request) {
  check_history(request.history);
  const auto body = build_chat_request(config_.model, request.history, request.tools)
                        .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(config_.request_timeout);
  client.set_write_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    const auto response =
        client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!response) {
      last_error = fmt::format("transport error: {}", httplib::to_string(response.error()));
    } else if (response->status >= 500) {
      last_error = fmt::format("HTTP {}: {}", response->status, response->body.substr(0, 512));
    } else if (response->status != 200) {
      throw BackendError(fmt::format("HTTP {} after {} attempt(s): {}", response->status, attempt,
                                     response->body.substr(0, 512)),
                         attempt);
    } else {
      try {
        return parse_chat_response(nlohmann::json::parse(response->body));
      } catch (const std::exception& e) {
        throw BackendError(fmt::format("malformed chat response: {}", e.what()), attempt);
      }
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendError(
      fmt::format("{} after {} attempt(s)", last_error, config_.max_attempts), config_.max_attempts);
}

}  // namespace medpipe
