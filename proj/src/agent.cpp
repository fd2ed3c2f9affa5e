#include "medpipe/agent.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <regex>

#include "medpipe/error.hpp"

namespace medpipe {

std::string_view to_string(AgentRole role) {
  switch (role) {
    case AgentRole::task_manager: return "task_manager";
    case AgentRole::data_engineer: return "data_engineer";
    case AgentRole::module_architect: return "module_architect";
    case AgentRole::model_trainer: return "model_trainer";
  }
  return "task_manager";
}

std::optional<AgentRole> parse_agent_role(std::string_view text) {
  for (auto role : kPipelineRoles) {
    if (to_string(role) == text) return role;
  }
  return std::nullopt;
}

int stage_number(AgentRole role) { return static_cast<int>(role) + 1; }

std::string_view to_string(AgentStatus status) {
  switch (status) {
    case AgentStatus::success: return "success";
    case AgentStatus::budget_exhausted: return "budget_exhausted";
    case AgentStatus::backend_failure: return "backend_failure";
    case AgentStatus::gave_up: return "gave_up";
  }
  return "success";
}

std::optional<AgentStatus> parse_agent_status(std::string_view text) {
  for (auto s : {AgentStatus::success, AgentStatus::budget_exhausted, AgentStatus::backend_failure,
                 AgentStatus::gave_up}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Calls `on_ref(name)` for each {identifier}; `on_text` receives the rest.
template <typename OnText, typename OnRef>
void scan_template(std::string_view text, OnText&& on_text, OnRef&& on_ref) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{' && i + 1 < text.size() && ident_start(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}') {
        on_ref(std::string(text.substr(i + 1, j - i - 1)));
        i = j + 1;
        continue;
      }
    }
    on_text(text[i]);
    ++i;
  }
}

std::string strip_end_marker(std::string text) {
  for (auto pos = text.find(kEndMarker); pos != std::string::npos; pos = text.find(kEndMarker)) {
    text.erase(pos, kEndMarker.size());
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

nlohmann::ordered_json calls_json(const std::vector<RawToolCall>& calls) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& c : calls) {
    out.push_back({{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}});
  }
  return out;
}

constexpr std::string_view kNudge =
    "Your reply contained no tool call and no <end> marker. Continue with the next tool call, "
    "or include <end> once your work is complete.";

}  // namespace

std::vector<std::string> template_placeholders(std::string_view text) {
  std::vector<std::string> names;
  scan_template(
      text, [](char) {},
      [&](std::string name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
      });
  return names;
}

Message build_prompt(const AgentSpec& spec, const Bindings& bindings) {
  std::string out;
  out.reserve(spec.system_prompt_template.size());
  scan_template(
      spec.system_prompt_template, [&](char c) { out.push_back(c); },
      [&](const std::string& name) {
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::config,
                      fmt::format("prompt for {} has an unbound placeholder: {}",
                                  to_string(spec.role), name));
        }
        out += it->second;
      });
  return Message::system(std::move(out));
}

AgentRun run_agent(const AgentSpec& spec, const Sandbox& sandbox, ChatBackend& backend,
                   const Bindings& bindings, const AgentContext& context) {
  if (spec.max_actions < 1) throw Error(ErrorCode::config, "max_actions must be at least 1");
  const std::string stage(to_string(spec.role));
  std::optional<std::regex> validation;
  if (!spec.validation_pattern.empty()) {
    try {
      validation.emplace(spec.validation_pattern);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::config, fmt::format("bad validation pattern for {}: {}", stage, e.what()));
    }
  }

  AgentRun run;
  auto& state = run.state;
  auto& outcome = run.outcome;
  const long long first_seq = context.transcript ? context.transcript->next_seq() : 0;
  auto log = [&](EventKind kind, nlohmann::ordered_json payload, long long tokens = 0) {
    if (context.transcript) context.transcript->append(stage, kind, std::move(payload), tokens);
  };

  state.history.push_back(build_prompt(spec, bindings));
  state.history.push_back(Message::user(context.user_message));
  log(EventKind::prompt, {{"system", state.history[0].content}, {"user", context.user_message}});

  const auto tools = tool_schemas(spec.tool_subset);
  int text_turns = 0;
  auto stop = [&](AgentStatus status, std::string detail) {
    outcome.status = status;
    outcome.detail = std::move(detail);
  };

  for (;;) {
    CompletionRequest request{context.run_id, stage, state.history, tools, context.variables};
    CompletionResult result;
    try {
      result = backend.complete(request);
    } catch (const BackendError& e) {
      stop(AgentStatus::backend_failure, e.what());
      break;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::config) throw;
      stop(AgentStatus::backend_failure, e.what());
      break;
    }
    const auto count = count_tokens(result, state.history);
    outcome.tokens += count.tokens;
    outcome.prompt_tokens += count.prompt;
    outcome.completion_tokens += count.completion;
    outcome.tokens_exact = outcome.tokens_exact && count.exact;
    log(EventKind::completion,
        {{"content", result.message.content},
         {"tool_calls", calls_json(result.message.tool_calls)},
         {"finish", std::string(to_string(result.finish))},
         {"exact_tokens", count.exact}},
        count.tokens);

    auto parsed = parse_tool_calls(result);
    state.history.push_back(result.message);

    if (parsed.kind == ReplyKind::termination) {
      state.terminated = true;
      outcome.final_text = strip_end_marker(parsed.text);
      stop(AgentStatus::success, {});
      break;
    }

    if (parsed.kind == ReplyKind::text) {
      if (++text_turns > spec.max_text_turns) {
        stop(AgentStatus::gave_up,
             fmt::format("{} consecutive replies without a tool call or end marker", text_turns));
        break;
      }
      state.history.push_back(Message::user(std::string(kNudge)));
      continue;
    }
    text_turns = 0;

    if (parsed.kind == ReplyKind::parse_failure) {
      if (state.actions_used >= spec.max_actions) {
        stop(AgentStatus::budget_exhausted,
             fmt::format("action budget of {} exhausted", spec.max_actions));
        break;
      }
      ++state.actions_used;
      const auto feedback = fmt::format(
          "error: could not decode the tool call arguments. {}\nReceived: {}\nResend the call "
          "with a JSON object as arguments.",
          parsed.error, parsed.malformed);
      log(EventKind::tool_call, {{"parse_failure", true}, {"malformed", parsed.malformed}});
      log(EventKind::tool_result, {{"status", "parse_failure"}, {"payload", feedback}});
      // Every call id of the rejected message gets an answer.
      for (const auto& call : result.message.tool_calls) {
        state.history.push_back(Message::tool(call.id, feedback));
      }
      continue;
    }

    bool halted = false;
    for (const auto& call : parsed.calls) {
      if (state.actions_used >= spec.max_actions) {
        stop(AgentStatus::budget_exhausted,
             fmt::format("action budget of {} exhausted", spec.max_actions));
        halted = true;
        break;
      }
      ++state.actions_used;
      log(EventKind::tool_call,
          {{"id", call.call_id}, {"name", call.tool_name}, {"arguments", call.arguments}});

      ToolResult tool_result;
      const auto tool = parse_tool_name(call.tool_name);
      if (tool && spec.tool_subset.count(*tool) == 0) {
        tool_result = {call.call_id, ToolStatus::tool_error,
                       fmt::format("tool \"{}\" is not available to the {} agent", call.tool_name,
                                   stage),
                       false, std::nullopt, false};
      } else {
        tool_result = dispatch(sandbox, call);
      }

      nlohmann::ordered_json payload = {
          {"id", call.call_id},
          {"status", tool_result.status == ToolStatus::ok ? "ok" : "tool_error"},
          {"payload", tool_result.payload},
          {"truncated", tool_result.truncated}};
      if (tool_result.exit_code) payload["exit_code"] = *tool_result.exit_code;
      log(EventKind::tool_result, std::move(payload));
      state.history.push_back(Message::tool(call.call_id, tool_result.payload));

      if (tool_result.exit_code) {
        state.last_feedback = tool_result.payload;
        const auto command = call.arguments.value("command", std::string());
        if (validation && std::regex_search(command, *validation)) {
          state.last_validation_exit = *tool_result.exit_code;
          if (*tool_result.exit_code != 0) {
            ++state.failed_script_runs;
            state.iteration = 1 + state.failed_script_runs;
            if (state.failed_script_runs >= spec.max_debug_iters) {
              stop(AgentStatus::gave_up,
                   fmt::format("validation still failing after {} iterations",
                               state.failed_script_runs));
              halted = true;
              break;
            }
          }
        }
      }
    }
    if (halted) break;
  }

  outcome.actions = state.actions_used;
  outcome.iterations = state.iteration;
  outcome.last_validation_exit = state.last_validation_exit;
  outcome.last_feedback = state.last_feedback;
  const long long last_seq = context.transcript ? context.transcript->next_seq() - 1 : 0;
  outcome.transcript_ref = fmt::format("transcript.jsonl#{}-{}", first_seq, last_seq);
  return run;
}

}  // namespace medpipe
