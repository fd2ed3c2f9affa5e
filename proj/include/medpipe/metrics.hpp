#pragma once

#include <map>
#include <string>
#include <vector>

#include "medpipe/agent.hpp"
#include "medpipe/run_record.hpp"

namespace medpipe {

/// "a/b": successful runs over total runs.
struct CompletionCell {
  int successes = 0;
  int total = 0;

  double percent() const;  // 0 when total is 0
  std::string str() const;

  bool operator==(const CompletionCell&) const = default;
};

struct TaskCell {
  std::string task_id;
  std::string category;
  CompletionCell cell;
};

enum class AverageMode {
  success_weighted,  // sum(a) / sum(b) x 100
  task_mean,         // mean over tasks of a/b x 100
};

struct CompletionSummary {
  AverageMode mode = AverageMode::success_weighted;
  std::vector<TaskCell> tasks;  // category order, then first appearance
  struct CategoryRow {
    std::string category;
    CompletionCell cell;
    double percent = 0.0;
  };
  std::vector<CategoryRow> categories;  // category order
  CompletionCell overall;
  double overall_percent = 0.0;
};

/// Sort key for category labels: the four bench categories first, in their
/// usual order, then anything else alphabetically.
int category_rank(const std::string& category);
bool category_less(const std::string& a, const std::string& b);

/// Throws invalid_argument on empty input or a cell with a > b.
CompletionSummary aggregate_cells(const std::vector<TaskCell>& cells,
                                  AverageMode mode = AverageMode::success_weighted);

/// Groups records by task id (run id when a record has none) and aggregates.
CompletionSummary aggregate_completion(const std::vector<RunRecord>& records,
                                       AverageMode mode = AverageMode::success_weighted);

struct RoleRow {
  std::string category;
  AgentRole role = AgentRole::task_manager;
  CompletionCell run_cell;
  double mean_actions = 0.0;
  double mean_iterations = 0.0;
  double mean_tokens = 0.0;
  bool tokens_exact = true;
};

struct MetricsTable {
  std::vector<RoleRow> rows;  // category order, then pipeline order
};

/// Means are taken over the runs in which the stage executed; a stage that
/// never ran in a category has no row.
MetricsTable role_metrics(const std::vector<RunRecord>& records);

double round2(double value);

}  // namespace medpipe
