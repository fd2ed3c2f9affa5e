#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medpipe/backend.hpp"
#include "medpipe/sandbox.hpp"
#include "medpipe/toolkit.hpp"
#include "medpipe/transcript.hpp"

namespace medpipe {

enum class AgentRole { task_manager, data_engineer, module_architect, model_trainer };

inline constexpr AgentRole kPipelineRoles[] = {AgentRole::task_manager, AgentRole::data_engineer,
                                               AgentRole::module_architect,
                                               AgentRole::model_trainer};

std::string_view to_string(AgentRole role);
std::optional<AgentRole> parse_agent_role(std::string_view text);
/// 1-based position in the pipeline.
int stage_number(AgentRole role);

using Bindings = std::map<std::string, std::string>;

struct AgentSpec {
  AgentRole role = AgentRole::task_manager;
  std::string system_prompt_template;
  std::set<ToolName> tool_subset;
  int max_actions = 100;
  int max_debug_iters = 5;
  /// ECMAScript regex searched in run_script commands. Matching runs are the
  /// stage's validation runs; each nonzero exit is one failed iteration.
  /// Empty means the stage has no validation command.
  std::string validation_pattern;
  /// Consecutive replies with neither tool calls nor `<end>` tolerated before
  /// the agent is considered stuck.
  int max_text_turns = 3;
};

enum class AgentStatus { success, budget_exhausted, backend_failure, gave_up };

std::string_view to_string(AgentStatus status);
std::optional<AgentStatus> parse_agent_status(std::string_view text);

struct AgentState {
  std::vector<Message> history;
  int actions_used = 0;
  int iteration = 1;  // 1 + failed_script_runs
  int failed_script_runs = 0;
  bool terminated = false;
  std::optional<int> last_validation_exit;
  std::string last_feedback;  // most recent run_script report
};

struct AgentOutcome {
  AgentStatus status = AgentStatus::success;
  std::string final_text;  // last assistant text with the end marker removed
  int actions = 0;
  int iterations = 1;
  long long tokens = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  bool tokens_exact = true;
  std::string transcript_ref;
  std::optional<int> last_validation_exit;
  std::string last_feedback;
  std::string detail;  // why the loop stopped, for non-success outcomes
};

/// Names of `{placeholder}` references in a template, in first-use order.
std::vector<std::string> template_placeholders(std::string_view text);

/// Substitutes every placeholder verbatim. An unbound placeholder is a config
/// error naming it.
Message build_prompt(const AgentSpec& spec, const Bindings& bindings);

struct AgentContext {
  std::string run_id;
  std::string user_message;  // opening user turn (task text, hand-off notes)
  Bindings variables;        // exposed to backends that template their replies
  Transcript* transcript = nullptr;
};

struct AgentRun {
  AgentOutcome outcome;
  AgentState state;
};

/// The function-calling loop: complete, parse, dispatch each call, feed the
/// results back, until `<end>`, budget exhaustion, the debug limit, or a
/// backend failure.
AgentRun run_agent(const AgentSpec& spec, const Sandbox& sandbox, ChatBackend& backend,
                   const Bindings& bindings, const AgentContext& context);

}  // namespace medpipe
