#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace medpipe {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

/// Tool call as it travels on the wire: arguments are still JSON text.
struct RawToolCall {
  std::string id;
  std::string name;
  std::string arguments;

  bool operator==(const RawToolCall&) const = default;
};

struct Message {
  Role role = Role::user;
  std::string content;
  std::vector<RawToolCall> tool_calls;  // assistant only
  std::string tool_call_id;             // tool only

  static Message system(std::string content) { return {Role::system, std::move(content), {}, {}}; }
  static Message user(std::string content) { return {Role::user, std::move(content), {}, {}}; }
  static Message assistant(std::string content, std::vector<RawToolCall> calls = {}) {
    return {Role::assistant, std::move(content), std::move(calls), {}};
  }
  static Message tool(std::string call_id, std::string content) {
    return {Role::tool, std::move(content), {}, std::move(call_id)};
  }

  bool operator==(const Message&) const = default;
};

/// Chat-completion wire form: {"role", "content", "tool_calls"?, "tool_call_id"?}.
nlohmann::json to_wire(const Message& message);
Message message_from_wire(const nlohmann::json& wire);

struct TokenUsage {
  long long prompt = 0;
  long long completion = 0;

  bool operator==(const TokenUsage&) const = default;
};

enum class FinishKind { text, tool_calls, length };

std::string_view to_string(FinishKind kind);

struct CompletionResult {
  Message message;
  std::optional<TokenUsage> usage;
  FinishKind finish = FinishKind::text;
};

}  // namespace medpipe
