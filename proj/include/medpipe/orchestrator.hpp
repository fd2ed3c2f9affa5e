#pragma once

#include <filesystem>
#include <functional>
#include <map>

#include "medpipe/backend.hpp"
#include "medpipe/pipeline.hpp"
#include "medpipe/run_record.hpp"
#include "medpipe/sandbox.hpp"

namespace medpipe {

/// Per-stage action budgets, in pipeline order.
struct StageBudgets {
  int task_manager = 10;
  int data_engineer = 35;
  int module_architect = 30;
  int model_trainer = 25;

  int for_role(AgentRole role) const;
  int total() const { return task_manager + data_engineer + module_architect + model_trainer; }

  /// Splits `total` in the default 10/35/30/25 proportions; every stage gets
  /// at least one action and the parts add up to `total` (total >= 4).
  static StageBudgets apportion(int total);
};

struct PipelineConfig {
  std::filesystem::path runs_dir;  // defaults to <workspace>/runs when empty
  StageBudgets budgets;
  int max_debug_iters = 5;
  SandboxLimits limits;
  std::map<AgentRole, AgentSpec> spec_overrides;
  /// Called before each stage starts, with the state it will see.
  std::function<void(AgentRole, const PipelineState&)> on_stage_begin;
};

/// Runs the four stages in order and persists the verdict. Configuration
/// problems throw before any stage starts; everything that goes wrong inside
/// a stage ends up in the returned record.
RunRecord run_pipeline(const TaskRequest& request, const Workspace& workspace,
                       ChatBackend& backend, const PipelineConfig& config,
                       PipelineState* final_state = nullptr);

/// Placeholder names the orchestrator binds; templates may use any of them.
const std::set<std::string>& pipeline_binding_names();

bool valid_run_id(std::string_view id);

}  // namespace medpipe
