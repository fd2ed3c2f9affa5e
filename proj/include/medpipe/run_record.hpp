#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medpipe/agent.hpp"

namespace medpipe {

struct StageRecord {
  AgentRole role = AgentRole::task_manager;
  bool success = false;
  int actions = 0;
  int iterations = 1;
  long long tokens = 0;
  std::string reason;
  AgentStatus status = AgentStatus::success;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  bool tokens_exact = true;

  bool operator==(const StageRecord&) const = default;
};

/// The persisted verdict of one run (verdict.json).
struct RunRecord {
  std::string run_id;
  std::string task;
  bool completed = false;
  std::vector<StageRecord> stages;  // executed stages only, in pipeline order
  std::string task_id;              // bench task id; empty for single runs
  std::string category;             // bench category; empty for single runs
  std::string halt_reason;
  std::optional<std::string> final_metric;  // "name=value" from the training output

  bool tokens_exact() const;
  nlohmann::ordered_json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);

  bool operator==(const RunRecord&) const = default;
};

void save_run_record(const std::filesystem::path& file, const RunRecord& record);
RunRecord load_run_record(const std::filesystem::path& file);

/// Every `<dir>/*/verdict.json` below `runs_dir`, ordered by run directory
/// name (natural order).
std::vector<RunRecord> load_run_records(const std::filesystem::path& runs_dir);

}  // namespace medpipe
