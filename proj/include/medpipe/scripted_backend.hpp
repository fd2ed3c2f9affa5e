#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medpipe/backend.hpp"

namespace medpipe {

struct ScriptedToolCall {
  std::string id;  // generated when empty
  std::string name;
  nlohmann::json arguments = nlohmann::json::object();
  std::optional<std::string> raw_arguments;  // sent verbatim, e.g. to inject malformed JSON
};

struct ScriptedStep {
  std::string text;
  std::vector<ScriptedToolCall> tool_calls;
  std::optional<TokenUsage> usage;
};

/// Replies for each stage, in order. Loaded from a JSON document:
///
///   {
///     "substitutions": {"name": "value", ...},
///     "stages": {
///       "<stage>": [
///         {"text": "...",
///          "tool_calls": [{"name": "read_files", "arguments": {"file": "{workspace}/x"}}],
///          "usage": {"prompt": 120, "completion": 30}},
///         ...
///       ]
///     }
///   }
///
/// A step may carry "step": <index>, which must equal its position. A call may
/// use "arguments_raw" (a string) in place of "arguments". `{name}` references
/// are replaced in texts and argument strings using the request variables,
/// falling back to "substitutions"; unknown names are left untouched.
struct ScriptedBehavior {
  std::map<std::string, std::vector<ScriptedStep>> stages;
  std::map<std::string, std::string> substitutions;

  static ScriptedBehavior from_json(const nlohmann::json& doc);
  static ScriptedBehavior load(const std::filesystem::path& file);
  nlohmann::json to_json() const;
};

/// Replaces `{name}` for every name present in `vars`.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars);

/// Deterministic stand-in for a model. Each (run_id, stage) pair has its own
/// cursor, so concurrent runs never share progress.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedBehavior behavior) : behavior_(std::move(behavior)) {}

  CompletionResult complete(const CompletionRequest& request) override;
  std::string name() const override { return "scripted"; }

  const ScriptedBehavior& behavior() const noexcept { return behavior_; }

 private:
  ScriptedBehavior behavior_;
  std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::size_t> cursors_;
};

}  // namespace medpipe
