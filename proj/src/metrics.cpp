#include "medpipe/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "medpipe/error.hpp"

namespace medpipe {

double CompletionCell::percent() const {
  return total == 0 ? 0.0 : 100.0 * successes / total;
}

std::string CompletionCell::str() const { return fmt::format("{}/{}", successes, total); }

double round2(double value) { return std::round(value * 100.0) / 100.0; }

int category_rank(const std::string& category) {
  static const char* order[] = {"OrgSeg", "AnoDet", "DisDiag", "RepGene"};
  for (int i = 0; i < 4; ++i) {
    if (category == order[i]) return i;
  }
  return 4;
}

bool category_less(const std::string& a, const std::string& b) {
  const int ra = category_rank(a), rb = category_rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

CompletionSummary aggregate_cells(const std::vector<TaskCell>& cells, AverageMode mode) {
  if (cells.empty()) throw Error(ErrorCode::invalid_argument, "no completion cells to aggregate");
  CompletionSummary out;
  out.mode = mode;
  out.tasks = cells;
  std::stable_sort(out.tasks.begin(), out.tasks.end(), [](const TaskCell& a, const TaskCell& b) {
    return category_less(a.category, b.category);
  });

  std::map<std::string, std::vector<const TaskCell*>> groups;
  double task_mean_sum = 0.0;
  for (const auto& t : out.tasks) {
    if (t.cell.successes < 0 || t.cell.total < 0 || t.cell.successes > t.cell.total) {
      throw Error(ErrorCode::invalid_argument,
                  fmt::format("task {} has an invalid cell {}", t.task_id, t.cell.str()));
    }
    groups[t.category].push_back(&t);
    out.overall.successes += t.cell.successes;
    out.overall.total += t.cell.total;
    task_mean_sum += t.cell.percent();
  }
  out.overall_percent = mode == AverageMode::success_weighted
                            ? out.overall.percent()
                            : task_mean_sum / static_cast<double>(out.tasks.size());

  std::vector<std::string> names;
  for (const auto& [name, _] : groups) names.push_back(name);
  std::sort(names.begin(), names.end(), category_less);
  for (const auto& name : names) {
    CompletionSummary::CategoryRow row;
    row.category = name;
    double sum = 0.0;
    for (const auto* t : groups[name]) {
      row.cell.successes += t->cell.successes;
      row.cell.total += t->cell.total;
      sum += t->cell.percent();
    }
    row.percent = mode == AverageMode::success_weighted
                      ? row.cell.percent()
                      : sum / static_cast<double>(groups[name].size());
    out.categories.push_back(std::move(row));
  }
  return out;
}

CompletionSummary aggregate_completion(const std::vector<RunRecord>& records, AverageMode mode) {
  if (records.empty()) throw Error(ErrorCode::invalid_argument, "no run records to aggregate");
  std::vector<TaskCell> cells;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const auto& id = r.task_id.empty() ? r.run_id : r.task_id;
    auto [it, fresh] = index.emplace(id, cells.size());
    if (fresh) cells.push_back({id, r.category, {}});
    auto& cell = cells[it->second];
    if (cell.category != r.category) {
      throw Error(ErrorCode::invalid_argument,
                  fmt::format("task {} appears under categories {} and {}", id, cell.category,
                              r.category));
    }
    cell.cell.total += 1;
    if (r.completed) cell.cell.successes += 1;
  }
  return aggregate_cells(cells, mode);
}

MetricsTable role_metrics(const std::vector<RunRecord>& records) {
  struct Acc {
    CompletionCell cell;
    double actions = 0, iterations = 0, tokens = 0;
    bool exact = true;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  for (const auto& r : records) {
    for (const auto& s : r.stages) {
      auto& a = acc[{r.category, static_cast<int>(s.role)}];
      a.cell.total += 1;
      if (s.success) a.cell.successes += 1;
      a.actions += s.actions;
      a.iterations += s.iterations;
      a.tokens += static_cast<double>(s.tokens);
      a.exact = a.exact && s.tokens_exact;
    }
  }
  MetricsTable table;
  for (const auto& [key, a] : acc) {
    RoleRow row;
    row.category = key.first;
    row.role = static_cast<AgentRole>(key.second);
    row.run_cell = a.cell;
    const double n = a.cell.total;
    row.mean_actions = a.actions / n;
    row.mean_iterations = a.iterations / n;
    row.mean_tokens = a.tokens / n;
    row.tokens_exact = a.exact;
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const RoleRow& a, const RoleRow& b) {
    if (a.category != b.category) return category_less(a.category, b.category);
    return static_cast<int>(a.role) < static_cast<int>(b.role);
  });
  return table;
}

}  // namespace medpipe
