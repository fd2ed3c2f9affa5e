#include "medpipe/cli.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "medpipe/bench.hpp"
#include "medpipe/error.hpp"
#include "medpipe/http_backend.hpp"
#include "medpipe/natural_sort.hpp"
#include "medpipe/orchestrator.hpp"
#include "medpipe/report.hpp"
#include "medpipe/scripted_backend.hpp"

namespace medpipe {

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfig = 2;

struct Options {
  std::string workspace = ".";

  bool force = false;

  std::string name, description, path;

  std::string task, task_kind, run_id, backend = "scripted", script, model, runs_dir;
  int max_actions = 100;
  int max_debug_iters = 5;
  double script_timeout = -1;
  std::optional<std::uint64_t> seed;

  std::string suite;
  int runs = 0;
  int parallel = 1;

  std::string format = "markdown", out;
  bool task_mean = false;
};

fs::path under(const fs::path& ws, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ws / path;
}

int cmd_init(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path root(o.workspace);
  std::error_code ec;
  if (fs::exists(root, ec) && !fs::is_directory(root, ec)) {
    err << fmt::format("error: {} exists and is not a directory\n", root.string());
    return kFailed;
  }
  if (fs::is_directory(root, ec) && !fs::is_empty(root, ec) && !o.force) {
    err << fmt::format("error: {} is not empty; pass --force to re-initialize\n", root.string());
    return kFailed;
  }
  for (auto sub : {WorkspaceLayout::index_examples, WorkspaceLayout::dataloader_examples,
                   WorkspaceLayout::training_scripts, WorkspaceLayout::runs}) {
    fs::create_directories(root / sub);
  }
  for (auto kind : kAllTaskKinds) {
    for (auto sub : {WorkspaceLayout::index_examples, WorkspaceLayout::dataloader_examples,
                     WorkspaceLayout::training_scripts}) {
      fs::create_directories(root / sub / std::string(to_string(kind)));
    }
  }
  const auto cards = root / WorkspaceLayout::datacard_file;
  fs::create_directories(cards.parent_path());
  save_datacards(cards, {});
  out << fmt::format("initialized workspace at {}\n", root.string());
  return kOk;
}

int cmd_add_dataset(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path root(o.workspace);
  const auto file = root / WorkspaceLayout::datacard_file;
  auto cards = load_datacards(file);
  for (const auto& c : cards) {
    if (c.name == o.name) {
      err << fmt::format("error: dataset \"{}\" is already registered\n", o.name);
      return kFailed;
    }
  }
  Datacard card{o.name, o.description, o.path};
  try {
    check_dataset_root(card, root);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailed;
  }
  cards.push_back(card);
  save_datacards(file, cards);
  out << fmt::format("registered {} ({} datasets)\n", o.name, cards.size());
  return kOk;
}

SandboxLimits limits_from(const Options& o, double default_timeout) {
  SandboxLimits limits;
  const double t = o.script_timeout > 0 ? o.script_timeout : default_timeout;
  limits.script_timeout = std::chrono::milliseconds(static_cast<long long>(t * 1000.0));
  return limits;
}

std::shared_ptr<ChatBackend> make_backend(const Options& o, const fs::path& ws) {
  if (o.backend == "http") {
    HttpBackendConfig config;
    auto env = [](const char* n) {
      const char* v = std::getenv(n);
      return v ? std::string(v) : std::string();
    };
    config.api_base = env("M3_API_BASE");
    config.api_key = env("M3_API_KEY");
    config.model = o.model.empty() ? env("M3_MODEL") : o.model;
    if (config.api_base.empty()) throw Error(ErrorCode::config, "M3_API_BASE is not set");
    if (config.model.empty()) throw Error(ErrorCode::config, "no model: set M3_MODEL or pass --model");
    return std::make_shared<HttpBackend>(config);
  }
  if (o.script.empty()) throw Error(ErrorCode::config, "the scripted backend needs --script");
  return std::make_shared<ScriptedBackend>(ScriptedBehavior::load(under(ws, o.script)));
}

std::string next_run_id(const fs::path& runs_dir) {
  for (int n = 1;; ++n) {
    auto id = fmt::format("run-{}", n);
    if (!fs::exists(runs_dir / id)) return id;
  }
}

void print_stage(std::ostream& out, const StageRecord& s) {
  out << fmt::format("{}: {} | actions={} iterations={} tokens={} | {}\n", to_string(s.role),
                     s.success ? "success" : "failed", s.actions, s.iterations, s.tokens, s.reason);
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path ws_root(o.workspace);
  const auto ws = Workspace::load(ws_root);
  auto backend = make_backend(o, ws_root);

  PipelineConfig config;
  config.runs_dir = o.runs_dir.empty() ? ws_root / WorkspaceLayout::runs : under(ws_root, o.runs_dir);
  config.budgets = StageBudgets::apportion(o.max_actions);
  config.max_debug_iters = o.max_debug_iters;
  config.limits = limits_from(o, 900.0);

  TaskRequest req;
  req.description = o.task;
  if (!o.task_kind.empty()) {
    req.task_kind = parse_task_kind(o.task_kind);
    if (!req.task_kind) throw Error(ErrorCode::config, fmt::format("unknown task kind \"{}\"", o.task_kind));
  }
  req.run_id = o.run_id.empty() ? next_run_id(config.runs_dir) : o.run_id;
  req.task_id = req.run_id;

  const auto record = run_pipeline(req, ws, *backend, config);
  out << fmt::format("run {}\n", record.run_id);
  for (const auto& s : record.stages) print_stage(out, s);
  if (record.completed) {
    out << "verdict: completed";
    if (record.final_metric) out << " (" << *record.final_metric << ")";
    out << "\n";
    return kOk;
  }
  out << fmt::format("verdict: halted ({})\n", record.halt_reason);
  err << fmt::format("run {} halted: {}\n", record.run_id, record.halt_reason);
  return kFailed;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path ws_root(o.workspace);
  const auto ws = Workspace::load(ws_root);
  const auto suite = load_suite(under(ws_root, o.suite));

  BenchConfig config;
  config.runs_dir = o.runs_dir.empty() ? ws_root / WorkspaceLayout::runs : under(ws_root, o.runs_dir);
  config.parallelism = o.parallel;
  if (o.runs > 0) config.runs_override = o.runs;
  config.seed = o.seed;
  config.pipeline.budgets = StageBudgets::apportion(o.max_actions);
  config.pipeline.max_debug_iters = o.max_debug_iters;
  config.pipeline.limits = limits_from(o, 60.0);
  if (o.backend == "http") {
    auto backend = make_backend(o, ws_root);
    config.backend_factory = [backend](const BenchTask&) { return backend; };
  }

  const auto records = run_bench(suite, ws, config);
  int completed = 0;
  for (const auto& r : records) {
    out << fmt::format("{} {}\n", r.run_id, r.completed ? "completed" : "halted: " + r.halt_reason);
    if (r.completed) ++completed;
  }
  out << fmt::format("{}/{} runs completed\n", completed, records.size());
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path ws_root(o.workspace);
  const auto dir = o.runs_dir.empty() ? ws_root / WorkspaceLayout::runs : under(ws_root, o.runs_dir);
  const auto format = parse_report_format(o.format);
  if (!format) {
    err << fmt::format("error: unknown report format \"{}\"\n", o.format);
    return kConfig;
  }
  std::vector<RunRecord> records;
  try {
    records = load_run_records(dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailed;
  }
  if (records.empty()) {
    err << fmt::format("error: no run records under {}\n", dir.string());
    return kFailed;
  }
  const auto text = render_report(
      build_report_tables(records, o.task_mean ? AverageMode::task_mean : AverageMode::success_weighted),
      *format);
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream file(under(ws_root, o.out), std::ios::binary | std::ios::trunc);
    file << text;
    if (!file) {
      err << "error: cannot write report\n";
      return kFailed;
    }
  }
  return kOk;
}

void add_budget_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--max-actions", o.max_actions, "Action budget for the whole run")
      ->check(CLI::Range(4, 1000000));
  cmd->add_option("--max-debug-iters", o.max_debug_iters, "Failed validation runs tolerated per stage")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--script-timeout", o.script_timeout, "run_script wall-clock limit in seconds")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--backend", o.backend, "scripted or http")
      ->check(CLI::IsMember({"scripted", "http"}));
  cmd->add_option("--model", o.model, "Model name for the http backend");
  cmd->add_option("--runs-dir", o.runs_dir, "Where run directories go");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Multi-agent pipeline runner for medical imaging AutoML tasks", "medpipe"};
  app.require_subcommand(1);
  app.add_option("-w,--workspace", o.workspace, "Workspace root")->capture_default_str();

  auto* init = app.add_subcommand("init", "Create the workspace scaffold");
  init->add_flag("--force", o.force, "Re-scaffold a non-empty workspace");

  auto* add = app.add_subcommand("add-dataset", "Register a dataset datacard");
  add->add_option("--name", o.name)->required();
  add->add_option("--description", o.description)->required();
  add->add_option("--path", o.path, "Dataset root, absolute or workspace-relative")->required();

  auto* run = app.add_subcommand("run", "Run the pipeline on one task");
  run->add_option("--task", o.task, "Task description")->required();
  run->add_option("--task-kind", o.task_kind, "segmentation, detection, diagnosis or report_generation");
  run->add_option("--script", o.script, "Scripted behavior file");
  run->add_option("--run-id", o.run_id);
  add_budget_flags(run, o);

  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--suite", o.suite, "Suite file")->required();
  bench->add_option("--runs", o.runs, "Runs per task (overrides the suite)")->check(CLI::PositiveNumber);
  bench->add_option("--parallel", o.parallel, "Concurrent runs")->check(CLI::PositiveNumber);
  bench->add_option("--seed", o.seed, "Shuffle execution order with this seed");
  add_budget_flags(bench, o);

  auto* report = app.add_subcommand("report", "Render tables from run records");
  report->add_option("--runs-dir", o.runs_dir);
  report->add_option("--format", o.format, "markdown or csv");
  report->add_flag("--task-mean", o.task_mean, "Average task rates instead of pooling runs");
  report->add_option("--out", o.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfig;
  }

  try {
    if (init->parsed()) return cmd_init(o, out, err);
    if (add->parsed()) return cmd_add_dataset(o, out, err);
    if (run->parsed()) return cmd_run(o, out, err);
    if (bench->parsed()) return cmd_bench(o, out, err);
    if (report->parsed()) return cmd_report(o, out, err);
  } catch (const Error& e) {
    err << fmt::format("error ({}): {}\n", to_string(e.code()), e.what());
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}

}  // namespace medpipe
