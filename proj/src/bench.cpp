#include "medpipe/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "medpipe/error.hpp"
#include "medpipe/scripted_backend.hpp"

namespace medpipe {

std::string_view to_string(Category category) {
  switch (category) {
    case Category::OrgSeg: return "OrgSeg";
    case Category::AnoDet: return "AnoDet";
    case Category::DisDiag: return "DisDiag";
    case Category::RepGene: return "RepGene";
  }
  return "DisDiag";
}

std::optional<Category> parse_category(std::string_view text) {
  for (auto c : {Category::OrgSeg, Category::AnoDet, Category::DisDiag, Category::RepGene}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

TaskKind category_task_kind(Category category) {
  switch (category) {
    case Category::OrgSeg: return TaskKind::segmentation;
    case Category::AnoDet: return TaskKind::detection;
    case Category::DisDiag: return TaskKind::diagnosis;
    case Category::RepGene: return TaskKind::report_generation;
  }
  return TaskKind::diagnosis;
}

std::vector<BenchTask> parse_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_array()) throw Error(ErrorCode::schema, "suite must be a JSON array");
  std::vector<BenchTask> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    auto need = [&](const char* key) -> std::string {
      if (!e.is_object() || !e.contains(key) || !e[key].is_string()) {
        throw Error(ErrorCode::schema, fmt::format("suite entry {}: missing string \"{}\"", i, key));
      }
      return e[key].get<std::string>();
    };
    BenchTask t;
    t.id = need("id");
    t.task_text = need("task");
    const auto cat = need("category");
    const auto parsed = parse_category(cat);
    if (!parsed) throw Error(ErrorCode::schema, fmt::format("suite entry {}: unknown category \"{}\"", i, cat));
    t.category = *parsed;
    t.expected_dataset = need("expected_dataset");
    if (e.contains("runs")) {
      if (!e["runs"].is_number_integer() || e["runs"].get<int>() < 1) {
        throw Error(ErrorCode::schema, fmt::format("suite entry {}: runs must be a positive integer", i));
      }
      t.runs = e["runs"].get<int>();
    }
    if (e.contains("scripted_behavior")) {
      std::filesystem::path p = need("scripted_behavior");
      t.scripted_behavior = p.is_absolute() ? p : base_dir / p;
    }
    if (e.contains("task_kind")) {
      const auto k = parse_task_kind(need("task_kind"));
      if (!k) throw Error(ErrorCode::schema, fmt::format("suite entry {}: unknown task_kind", i));
      t.task_kind = *k;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<BenchTask> load_suite(const std::filesystem::path& file) {
  const auto doc = nlohmann::json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::parse, fmt::format("{} is not valid JSON", file.string()));
  return parse_suite(doc, file.parent_path());
}

std::string bench_run_id(const BenchTask& task, int k) { return fmt::format("{}-r{}", task.id, k); }

namespace {

std::filesystem::path runs_root(const Workspace& ws, const BenchConfig& config) {
  return config.runs_dir.empty() ? ws.root / WorkspaceLayout::runs : config.runs_dir;
}

int runs_for(const BenchTask& t, const BenchConfig& config) {
  return config.runs_override ? *config.runs_override : t.runs;
}

}  // namespace

void check_suite(const std::vector<BenchTask>& suite, const Workspace& workspace,
                 const BenchConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::config, "suite error: " + msg); };
  if (suite.empty()) fail("no tasks");
  if (config.parallelism < 1) fail("parallelism must be at least 1");
  if (config.runs_override && *config.runs_override < 1) fail("runs must be at least 1");
  std::set<std::string> ids;
  const auto root = runs_root(workspace, config);
  for (const auto& t : suite) {
    if (!ids.insert(t.id).second) fail(fmt::format("duplicate task id \"{}\"", t.id));
    if (t.task_text.empty()) fail(fmt::format("task {} has no text", t.id));
    if (runs_for(t, config) < 1) fail(fmt::format("task {} needs at least one run", t.id));
    const Datacard* card = nullptr;
    try {
      card = &resolve_dataset(workspace.datacards, t.expected_dataset);
    } catch (const Error&) {
      fail(fmt::format("task {}: dataset \"{}\" is not registered", t.id, t.expected_dataset));
    }
    std::error_code ec;
    if (!std::filesystem::is_directory(workspace.dataset_root(*card), ec)) {
      fail(fmt::format("task {}: dataset directory {} is missing", t.id,
                       workspace.dataset_root(*card).string()));
    }
    if (!config.backend_factory) {
      if (!t.scripted_behavior) fail(fmt::format("task {} has no scripted behavior", t.id));
      try {
        ScriptedBehavior::load(*t.scripted_behavior);
      } catch (const std::exception& e) {
        fail(fmt::format("task {}: {}", t.id, e.what()));
      }
    }
    for (int k = 1; k <= runs_for(t, config); ++k) {
      const auto id = bench_run_id(t, k);
      if (!valid_run_id(id)) fail(fmt::format("invalid run id \"{}\"", id));
      if (std::filesystem::exists(root / id)) fail(fmt::format("run directory {} already exists", (root / id).string()));
    }
  }
}

std::vector<RunRecord> run_bench(const std::vector<BenchTask>& suite, const Workspace& workspace,
                                 const BenchConfig& config) {
  check_suite(suite, workspace, config);

  std::vector<std::shared_ptr<ChatBackend>> backends;
  for (const auto& t : suite) {
    backends.push_back(config.backend_factory
                           ? config.backend_factory(t)
                           : std::make_shared<ScriptedBackend>(ScriptedBehavior::load(*t.scripted_behavior)));
  }

  struct Job {
    std::size_t task;
    int k;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    for (int k = 1; k <= runs_for(suite[i], config); ++k) jobs.push_back({i, k});
  }
  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (config.seed) {
    std::mt19937_64 rng(*config.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  PipelineConfig pc = config.pipeline;
  pc.runs_dir = runs_root(workspace, config);

  std::vector<RunRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const auto slot = next.fetch_add(1);
      if (slot >= order.size()) return;
      const auto& job = jobs[order[slot]];
      const auto& task = suite[job.task];
      TaskRequest req;
      req.description = task.task_text;
      req.task_kind = task.task_kind ? task.task_kind : category_task_kind(task.category);
      req.run_id = bench_run_id(task, job.k);
      req.task_id = task.id;
      req.category = std::string(to_string(task.category));
      req.expected_dataset = task.expected_dataset;
      try {
        records[order[slot]] = run_pipeline(req, workspace, *backends[job.task], pc);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), jobs.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < n; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

}  // namespace medpipe
