#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medpipe/backend.hpp"
#include "medpipe/orchestrator.hpp"
#include "medpipe/workspace.hpp"

namespace medpipe {

enum class Category { OrgSeg, AnoDet, DisDiag, RepGene };

std::string_view to_string(Category category);
std::optional<Category> parse_category(std::string_view text);
TaskKind category_task_kind(Category category);

struct BenchTask {
  std::string id;
  std::string task_text;
  Category category = Category::DisDiag;
  std::string expected_dataset;
  int runs = 5;
  std::optional<std::filesystem::path> scripted_behavior;
  std::optional<TaskKind> task_kind;  // defaults to the category's kind
};

/// Suite file: a JSON array of
///   {"id", "task", "category", "expected_dataset", "runs"?, "scripted_behavior"?, "task_kind"?}
/// Relative behavior paths resolve against `base_dir`.
std::vector<BenchTask> parse_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir);
std::vector<BenchTask> load_suite(const std::filesystem::path& file);

using BackendFactory = std::function<std::shared_ptr<ChatBackend>(const BenchTask&)>;

struct BenchConfig {
  std::filesystem::path runs_dir;  // defaults to <workspace>/runs
  PipelineConfig pipeline;
  int parallelism = 1;
  std::optional<int> runs_override;
  std::optional<std::uint64_t> seed;  // shuffles execution order when set
  BackendFactory backend_factory;     // default: scripted backend from the task's behavior file
};

/// Checks every fixture up front (unique ids, registered dataset with an
/// existing root, loadable behavior, free run directories) and throws a
/// config error naming the first problem, before anything runs.
void check_suite(const std::vector<BenchTask>& suite, const Workspace& workspace,
                 const BenchConfig& config);

/// runs x tasks pipeline executions, run ids "<task id>-r<k>". Records come
/// back in suite order whatever the execution order was.
std::vector<RunRecord> run_bench(const std::vector<BenchTask>& suite, const Workspace& workspace,
                                 const BenchConfig& config);

std::string bench_run_id(const BenchTask& task, int k);

}  // namespace medpipe
