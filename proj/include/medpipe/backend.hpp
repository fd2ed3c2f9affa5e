#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "medpipe/message.hpp"
#include "medpipe/toolkit.hpp"

namespace medpipe {

inline constexpr std::string_view kEndMarker = "<end>";

/// One completion request. `run_id` and `stage` let stateful backends keep
/// separate cursors per run; `variables` carries run-time values that
/// scripted replies may reference.
struct CompletionRequest {
  std::string run_id;
  std::string stage;
  std::span<const Message> history;
  nlohmann::json tools = nlohmann::json::array();
  std::map<std::string, std::string> variables;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Throws a config error unless the history starts with exactly one system
/// message.
void check_history(std::span<const Message> history);

enum class ReplyKind { tool_calls, termination, text, parse_failure };

struct ParsedReply {
  ReplyKind kind = ReplyKind::text;
  std::vector<ToolCall> calls;  // tool_calls only
  std::string text;             // assistant content
  std::string malformed;        // parse_failure: the offending argument text
  std::string error;            // parse_failure: decoder message
};

/// Tool calls win over the end marker; `<end>` is a plain substring match on
/// the content of a reply that carries no tool calls.
ParsedReply parse_tool_calls(const CompletionResult& raw);

struct TokenCount {
  long long tokens = 0;
  long long prompt = 0;
  long long completion = 0;
  bool exact = false;
};

inline constexpr double kTokenEstimateFactor = 1.3;

/// Backend-reported usage when present; otherwise 1.3 x whitespace-separated
/// tokens of history plus reply, rounded.
TokenCount count_tokens(const CompletionResult& result, std::span<const Message> history);

std::size_t whitespace_tokens(std::string_view text);

}  // namespace medpipe
