#include "medpipe/scripted_backend.hpp"

#include <fmt/format.h>

#include "medpipe/error.hpp"
#include "medpipe/workspace.hpp"

namespace medpipe {

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = std::string(text.substr(i + 1, close - i - 1));
        if (const auto it = vars.find(name); it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

namespace {

nlohmann::json substitute_json(const nlohmann::json& value,
                               const std::map<std::string, std::string>& vars) {
  if (value.is_string()) return substitute(value.get_ref<const std::string&>(), vars);
  if (value.is_array()) {
    auto out = nlohmann::json::array();
    for (const auto& v : value) out.push_back(substitute_json(v, vars));
    return out;
  }
  if (value.is_object()) {
    auto out = nlohmann::json::object();
    for (const auto& [k, v] : value.items()) out[k] = substitute_json(v, vars);
    return out;
  }
  return value;
}

ScriptedStep parse_step(const nlohmann::json& j, const std::string& stage, std::size_t index) {
  if (!j.is_object()) {
    throw Error(ErrorCode::schema, fmt::format("stage {} step {} must be an object", stage, index));
  }
  if (const auto it = j.find("step"); it != j.end()) {
    if (!it->is_number_unsigned() || it->get<std::size_t>() != index) {
      throw Error(ErrorCode::schema,
                  fmt::format("stage {}: step index {} is out of order (expected {})", stage,
                              it->dump(), index));
    }
  }
  ScriptedStep step;
  step.text = j.value("text", std::string());
  if (const auto it = j.find("tool_calls"); it != j.end()) {
    if (!it->is_array()) {
      throw Error(ErrorCode::schema,
                  fmt::format("stage {} step {}: tool_calls must be an array", stage, index));
    }
    for (const auto& c : *it) {
      ScriptedToolCall call;
      call.id = c.value("id", std::string());
      call.name = c.value("name", std::string());
      if (call.name.empty()) {
        throw Error(ErrorCode::schema,
                    fmt::format("stage {} step {}: tool call without a name", stage, index));
      }
      if (const auto raw = c.find("arguments_raw"); raw != c.end()) {
        call.raw_arguments = raw->get<std::string>();
      } else {
        call.arguments = c.value("arguments", nlohmann::json::object());
      }
      step.tool_calls.push_back(std::move(call));
    }
  }
  if (const auto it = j.find("usage"); it != j.end()) {
    step.usage = TokenUsage{it->value("prompt", 0LL), it->value("completion", 0LL)};
  }
  return step;
}

}  // namespace

ScriptedBehavior ScriptedBehavior::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("stages") || !doc.at("stages").is_object()) {
    throw Error(ErrorCode::schema, "scripted behavior needs a \"stages\" object");
  }
  ScriptedBehavior behavior;
  for (const auto& [stage, steps] : doc.at("stages").items()) {
    if (!steps.is_array()) {
      throw Error(ErrorCode::schema, fmt::format("stage {} must be an array of steps", stage));
    }
    auto& out = behavior.stages[stage];
    for (std::size_t i = 0; i < steps.size(); ++i) out.push_back(parse_step(steps[i], stage, i));
  }
  if (const auto it = doc.find("substitutions"); it != doc.end()) {
    for (const auto& [k, v] : it->items()) behavior.substitutions[k] = v.get<std::string>();
  }
  return behavior;
}

ScriptedBehavior ScriptedBehavior::load(const std::filesystem::path& file) {
  const auto text = read_text_file(file);
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", file.string(), e.what()));
  }
}

nlohmann::json ScriptedBehavior::to_json() const {
  nlohmann::json doc;
  doc["substitutions"] = substitutions;
  auto stages_json = nlohmann::json::object();
  for (const auto& [stage, steps] : stages) {
    auto arr = nlohmann::json::array();
    for (const auto& step : steps) {
      nlohmann::json s = {{"text", step.text}};
      if (!step.tool_calls.empty()) {
        auto calls = nlohmann::json::array();
        for (const auto& c : step.tool_calls) {
          nlohmann::json call = {{"name", c.name}};
          if (!c.id.empty()) call["id"] = c.id;
          if (c.raw_arguments) {
            call["arguments_raw"] = *c.raw_arguments;
          } else {
            call["arguments"] = c.arguments;
          }
          calls.push_back(std::move(call));
        }
        s["tool_calls"] = std::move(calls);
      }
      if (step.usage) s["usage"] = {{"prompt", step.usage->prompt}, {"completion", step.usage->completion}};
      arr.push_back(std::move(s));
    }
    stages_json[stage] = std::move(arr);
  }
  doc["stages"] = std::move(stages_json);
  return doc;
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
  check_history(request.history);
  std::size_t index = 0;
  {
    std::lock_guard lock(mutex_);
    index = cursors_[{request.run_id, request.stage}]++;
  }
  const auto it = behavior_.stages.find(request.stage);
  if (it == behavior_.stages.end() || index >= it->second.size()) {
    throw Error(ErrorCode::script_exhausted,
                fmt::format("scripted behavior has no step {} for stage {}", index, request.stage));
  }
  const auto& step = it->second[index];

  auto vars = behavior_.substitutions;
  for (const auto& [k, v] : request.variables) vars[k] = v;

  CompletionResult result;
  result.message.role = Role::assistant;
  result.message.content = substitute(step.text, vars);
  for (std::size_t k = 0; k < step.tool_calls.size(); ++k) {
    const auto& call = step.tool_calls[k];
    RawToolCall raw;
    raw.id = call.id.empty() ? fmt::format("call_{}_{}_{}", request.stage, index, k) : call.id;
    raw.name = call.name;
    raw.arguments = call.raw_arguments ? substitute(*call.raw_arguments, vars)
                                       : substitute_json(call.arguments, vars).dump();
    result.message.tool_calls.push_back(std::move(raw));
  }
  result.usage = step.usage;
  result.finish = result.message.tool_calls.empty() ? FinishKind::text : FinishKind::tool_calls;
  return result;
}

}  // namespace medpipe
