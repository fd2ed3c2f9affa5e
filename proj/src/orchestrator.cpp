#include "medpipe/orchestrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include "medpipe/error.hpp"
#include "medpipe/prompts.hpp"
#include "medpipe/transcript.hpp"

namespace medpipe {

int StageBudgets::for_role(AgentRole role) const {
  switch (role) {
    case AgentRole::task_manager: return task_manager;
    case AgentRole::data_engineer: return data_engineer;
    case AgentRole::module_architect: return module_architect;
    case AgentRole::model_trainer: return model_trainer;
  }
  return 0;
}

StageBudgets StageBudgets::apportion(int total) {
  if (total < 4) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("action budget {} cannot cover four stages", total));
  }
  constexpr std::array<int, 4> weights = {10, 35, 30, 25};
  std::array<int, 4> parts{};
  std::array<int, 4> rest{};
  int used = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const long long scaled = static_cast<long long>(total) * weights[i];
    parts[i] = static_cast<int>(scaled / 100);
    rest[i] = static_cast<int>(scaled % 100);
    used += parts[i];
  }
  // largest remainder, earlier stage first on ties
  while (used < total) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) {
      if (rest[i] > rest[best]) best = i;
    }
    ++parts[best];
    rest[best] = -1;
    ++used;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    while (parts[i] < 1) {
      auto donor = std::max_element(parts.begin(), parts.end());
      --*donor;
      ++parts[i];
    }
  }
  return {parts[0], parts[1], parts[2], parts[3]};
}

const std::set<std::string>& pipeline_binding_names() {
  static const std::set<std::string> names = {
      "description_path", "selector_content", "save_path",      "examples_path",
      "dataindex_path",   "template_path",    "processor_msg",  "description",
      "dataloader_msg",   "work_path",        "train_script_path",
  };
  return names;
}

bool valid_run_id(std::string_view id) {
  if (id.empty() || id == "." || id == ".." || id.size() > 200) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
  });
}

namespace {

void write_file(const fs::path& file, std::string_view text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", file.string()));
}

std::string stage_message(AgentRole role, const PipelineState& state) {
  std::string msg = fmt::format("Task: {}", state.task.description);
  if (state.task.task_kind) msg += fmt::format("\nTask kind: {}", to_string(*state.task.task_kind));
  if (role == AgentRole::data_engineer && !state.plan.plan_text.empty()) {
    msg += fmt::format("\n\nPlan from the task manager:\n{}", state.plan.plan_text);
  }
  return msg;
}

StageRecord to_record(const StageReport& report) {
  const auto& o = report.outcome;
  StageRecord r;
  r.role = report.role;
  r.success = report.success;
  r.actions = o.actions;
  r.iterations = o.iterations;
  r.tokens = o.tokens;
  r.reason = report.reason;
  r.status = o.status;
  r.prompt_tokens = o.prompt_tokens;
  r.completion_tokens = o.completion_tokens;
  r.tokens_exact = o.tokens_exact;
  return r;
}

}  // namespace

RunRecord run_pipeline(const TaskRequest& request, const Workspace& workspace,
                       ChatBackend& backend, const PipelineConfig& config,
                       PipelineState* final_state) {
  if (request.description.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::config, "task description is empty");
  }
  if (!valid_run_id(request.run_id)) {
    throw Error(ErrorCode::config, fmt::format("invalid run id \"{}\"", request.run_id));
  }
  if (config.max_debug_iters < 1) throw Error(ErrorCode::config, "max_debug_iters must be >= 1");

  std::map<AgentRole, AgentSpec> specs;
  for (auto role : kPipelineRoles) {
    const int budget = config.budgets.for_role(role);
    if (budget < 1) {
      throw Error(ErrorCode::config, fmt::format("{} has no action budget", to_string(role)));
    }
    auto it = config.spec_overrides.find(role);
    AgentSpec spec = it != config.spec_overrides.end()
                         ? it->second
                         : default_agent_spec(role, budget, config.max_debug_iters);
    if (spec.max_actions < 1) {
      throw Error(ErrorCode::config, fmt::format("{} has no action budget", to_string(role)));
    }
    for (const auto& name : template_placeholders(spec.system_prompt_template)) {
      if (!pipeline_binding_names().count(name)) {
        throw Error(ErrorCode::config,
                    fmt::format("prompt for {} has an unbound placeholder: {}", to_string(role), name));
      }
    }
    specs.emplace(role, std::move(spec));
  }

  const fs::path runs_dir =
      config.runs_dir.empty() ? workspace.root / WorkspaceLayout::runs : config.runs_dir;
  const fs::path run_dir = runs_dir / request.run_id;
  if (fs::exists(run_dir)) {
    throw Error(ErrorCode::config, fmt::format("run directory {} already exists", run_dir.string()));
  }
  fs::create_directories(run_dir / RunLayout::datapath);
  fs::create_directories(run_dir / RunLayout::model);
  fs::create_directories(run_dir / RunLayout::logout);

  Transcript transcript(request.run_id, run_dir / RunLayout::transcript);
  auto state = PipelineState::initial(request);

  Bindings bindings = {
      {"description_path", workspace.datacard_file().string()},
      {"save_path", (run_dir / RunLayout::datapath).string()},
      {"examples_path", workspace.examples_dir.string()},
      {"template_path", workspace.dataloader_dir.string()},
      {"work_path", run_dir.string()},
      {"train_script_path", workspace.scripts_dir.string()},
  };

  RunRecord record;
  record.run_id = request.run_id;
  record.task = request.description;
  record.task_id = request.task_id;
  record.category = request.category;

  for (auto role : kPipelineRoles) {
    if (config.on_stage_begin) config.on_stage_begin(role, state);

    std::vector<fs::path> allow = {workspace.root / "DataCard", workspace.root / "ReferenceFiles"};
    if (state.plan.selected) allow.push_back(workspace.dataset_root(*state.plan.selected));
    Sandbox sandbox(run_dir, allow, config.limits);

    AgentContext ctx;
    ctx.run_id = request.run_id;
    ctx.user_message = stage_message(role, state);
    ctx.transcript = &transcript;
    ctx.variables = bindings;
    ctx.variables["workspace"] = workspace.root.string();
    ctx.variables["run_dir"] = run_dir.string();
    ctx.variables["run_id"] = request.run_id;
    ctx.variables["datapath"] = (run_dir / RunLayout::datapath).string();
    ctx.variables["examples_path"] = workspace.examples_dir.string();
    ctx.variables["template_path"] = workspace.dataloader_dir.string();
    ctx.variables["train_script_path"] = workspace.scripts_dir.string();
    ctx.variables["task_kind"] = state.plan.task_kind ? std::string(to_string(*state.plan.task_kind)) : "";
    if (state.plan.selected) {
      ctx.variables["dataset_name"] = state.plan.selected->name;
      ctx.variables["dataset_path"] = workspace.dataset_root(*state.plan.selected).string();
    }

    auto run = run_agent(specs.at(role), sandbox, backend, bindings, ctx);

    StageReport report;
    report.role = role;
    report.outcome = run.outcome;
    report.summary = run.outcome.final_text;

    if (role == AgentRole::task_manager && run.outcome.status == AgentStatus::success) {
      const auto pick = parse_dataset_selection(run.outcome.final_text);
      state.plan.plan_text = run.outcome.final_text;
      state.plan.no_dataset = !pick.name && pick.no_dataset;
      if (pick.name) {
        try {
          state.plan.selected = resolve_dataset(workspace.datacards, *pick.name);
        } catch (const Error&) {
        }
      }
      if (!state.plan.task_kind) state.plan.task_kind = infer_task_kind(state.plan.plan_text);
    }

    const auto check = detect_stage_success(role, run_dir, state, run.outcome, workspace);
    report.success = check.success;
    report.reason = check.reason;

    state.code_artifacts = snapshot_code(run_dir, config.limits.code_extensions);
    if (!run.outcome.last_feedback.empty()) state.last_feedback = run.outcome.last_feedback;
    state.stage_reports.push_back(report);
    record.stages.push_back(to_record(report));

    nlohmann::ordered_json verdict = {{"role", std::string(to_string(role))},
                                      {"success", report.success},
                                      {"status", std::string(to_string(run.outcome.status))},
                                      {"actions", run.outcome.actions},
                                      {"iterations", run.outcome.iterations},
                                      {"tokens", run.outcome.tokens},
                                      {"reason", report.reason}};
    transcript.append(to_string(role), EventKind::verdict, std::move(verdict), 0);

    if (role == AgentRole::task_manager && report.success) {
      write_file(run_dir / RunLayout::plan, state.plan.plan_text + "\n");
    }
    if (!report.success) {
      record.halt_reason = fmt::format("{}: {}", to_string(role), report.reason);
      break;
    }
    if (role == AgentRole::task_manager && state.plan.no_dataset) {
      record.halt_reason = "task_manager: no dataset fits the request";
      break;
    }
    if (role == AgentRole::model_trainer) break;
    try {
      for (auto& [k, v] : hand_off(report, state, workspace, run_dir)) bindings[k] = v;
    } catch (const Error& e) {
      record.halt_reason = fmt::format("{}: {}", to_string(role), e.what());
      break;
    }
  }

  record.completed = record.halt_reason.empty() && record.stages.size() == 4 &&
                     std::all_of(record.stages.begin(), record.stages.end(),
                                 [](const StageRecord& s) { return s.success; });
  if (record.completed) record.final_metric = parse_final_metric(state.last_feedback);
  save_run_record(run_dir / RunLayout::verdict, record);
  if (final_state) *final_state = std::move(state);
  return record;
}

}  // namespace medpipe
