#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medpipe/agent.hpp"
#include "medpipe/workspace.hpp"

namespace medpipe {

struct TaskRequest {
  std::string description;
  std::optional<TaskKind> task_kind;
  std::string run_id;
  std::string task_id;                          // bench bookkeeping
  std::string category;                         // bench bookkeeping
  std::optional<std::string> expected_dataset;  // bench: the selection that counts as right
};

struct Plan {
  std::optional<Datacard> selected;
  bool no_dataset = false;
  std::string plan_text;         // persisted as plan.md
  std::string selector_message;  // the selected card, handed to the data engineer
  std::optional<TaskKind> task_kind;
};

struct StageReport {
  AgentRole role = AgentRole::task_manager;
  AgentOutcome outcome;
  bool success = false;
  std::string reason;
  std::string summary;
};

struct ModuleOutput {
  std::string dataloader_path;
  std::string summary;
};

/// Everything threaded from one stage to the next.
struct PipelineState {
  TaskRequest task;
  Plan plan;
  std::map<std::string, std::string> code_artifacts;  // run-relative path -> content hash
  std::string last_feedback;                          // most recent execution report
  ModuleOutput module_output;
  std::string processor_msg;
  std::string dataloader_msg;
  std::vector<StageReport> stage_reports;

  /// Empty artifacts and empty feedback.
  static PipelineState initial(TaskRequest task);
};

/// Names inside a run directory.
struct RunLayout {
  static constexpr std::string_view datapath = "Datapath";
  static constexpr std::string_view model = "Model";
  static constexpr std::string_view logout = "Logout";
  static constexpr std::string_view transcript = "transcript.jsonl";
  static constexpr std::string_view verdict = "verdict.json";
  static constexpr std::string_view plan = "plan.md";
  static constexpr std::string_view dataloader = "Datapath/dataloader.py";
  static constexpr std::string_view model_artifact = "Logout/model.bin";
};

struct DatasetSelection {
  std::optional<std::string> name;
  bool no_dataset = false;
};

/// Reads the task manager's answer: the first JSON object carrying a
/// "dataset name" key, else a quoted "dataset name": "..." pair, else an
/// explicit "no dataset" statement.
DatasetSelection parse_dataset_selection(std::string_view text);

/// First task kind named in free text, if any.
std::optional<TaskKind> infer_task_kind(std::string_view text);

struct StageCheck {
  bool success = false;
  std::string reason;
};

/// Role-specific success check run after an agent stops. Never throws.
StageCheck detect_stage_success(AgentRole role, const fs::path& run_dir,
                                const PipelineState& state, const AgentOutcome& outcome,
                                const Workspace& workspace);

/// Prompt bindings produced by a finished stage for the ones after it.
/// Throws hand_off when the stage left no summary.
Bindings hand_off(const StageReport& report, PipelineState& state, const Workspace& workspace,
                  const fs::path& run_dir);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(std::string_view bytes);

/// Hashes of every code file in the run directory (by extension).
std::map<std::string, std::string> snapshot_code(const fs::path& run_dir,
                                                 const std::set<std::string>& extensions);

/// Last `FINAL_METRIC <name>=<value>` in a training output, as "name=value".
std::optional<std::string> parse_final_metric(std::string_view output);

}  // namespace medpipe
