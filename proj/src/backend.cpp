#include "medpipe/backend.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>

#include "medpipe/error.hpp"

namespace medpipe {

void check_history(std::span<const Message> history) {
  std::size_t systems = 0;
  for (const auto& m : history) systems += m.role == Role::system ? 1 : 0;
  if (history.empty() || history.front().role != Role::system || systems != 1) {
    throw Error(ErrorCode::config, "history must begin with exactly one system message");
  }
}

ParsedReply parse_tool_calls(const CompletionResult& raw) {
  ParsedReply reply;
  reply.text = raw.message.content;
  if (!raw.message.tool_calls.empty()) {
    for (const auto& call : raw.message.tool_calls) {
      nlohmann::json args;
      const bool blank = call.arguments.find_first_not_of(" \t\r\n") == std::string::npos;
      if (blank) {
        args = nlohmann::json::object();
      } else {
        try {
          args = nlohmann::json::parse(call.arguments);
        } catch (const nlohmann::json::parse_error& e) {
          reply.kind = ReplyKind::parse_failure;
          reply.calls.clear();
          reply.malformed = call.arguments;
          reply.error = fmt::format("arguments for {} are not valid JSON: {}", call.name, e.what());
          return reply;
        }
      }
      if (!args.is_object()) {
        reply.kind = ReplyKind::parse_failure;
        reply.calls.clear();
        reply.malformed = call.arguments;
        reply.error = fmt::format("arguments for {} must be a JSON object", call.name);
        return reply;
      }
      reply.calls.push_back({call.id, call.name, std::move(args)});
    }
    reply.kind = ReplyKind::tool_calls;
    return reply;
  }
  reply.kind = raw.message.content.find(kEndMarker) != std::string::npos ? ReplyKind::termination
                                                                         : ReplyKind::text;
  return reply;
}

std::size_t whitespace_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

namespace {

std::size_t message_tokens(const Message& m) {
  std::size_t n = whitespace_tokens(m.content);
  for (const auto& call : m.tool_calls) {
    n += whitespace_tokens(call.name) + whitespace_tokens(call.arguments);
  }
  return n;
}

long long estimate(std::size_t words) {
  return std::llround(static_cast<double>(words) * kTokenEstimateFactor);
}

}  // namespace

TokenCount count_tokens(const CompletionResult& result, std::span<const Message> history) {
  if (result.usage) {
    return {result.usage->prompt + result.usage->completion, result.usage->prompt,
            result.usage->completion, true};
  }
  std::size_t prompt_words = 0;
  for (const auto& m : history) prompt_words += message_tokens(m);
  const std::size_t reply_words = message_tokens(result.message);
  TokenCount count;
  count.tokens = estimate(prompt_words + reply_words);
  count.prompt = estimate(prompt_words);
  count.completion = count.tokens - count.prompt;
  count.exact = false;
  return count;
}

}  // namespace medpipe
