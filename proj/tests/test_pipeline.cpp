#include <random>
#include <thread>

#include "doctest.h"
#include "fixture.hpp"
#include "medpipe/error.hpp"
#include "medpipe/orchestrator.hpp"
#include "medpipe/prompts.hpp"
#include "medpipe/scripted_backend.hpp"
#include "medpipe/transcript.hpp"
#include "test_support.hpp"

using namespace medpipe;
using json = nlohmann::json;
using testsupport::TempDir;
using testsupport::tree_snapshot;

namespace {

struct World {
  TempDir tmp;
  fixture::ToyWorkspace toy = fixture::build_toy_workspace(tmp / "ws");
  Workspace ws = Workspace::load(toy.root);

  RunRecord run(const json& behavior, const std::string& run_id = "r1", PipelineState* state = nullptr,
                PipelineConfig config = {}, TaskRequest req = {}) {
    ScriptedBackend backend(ScriptedBehavior::from_json(behavior));
    if (req.description.empty()) req.description = "Diagnose pneumonia from chest CT scans.";
    req.run_id = run_id;
    return run_pipeline(req, ws, backend, config, state);
  }
  fs::path run_dir(const std::string& id = "r1") const { return toy.root / "runs" / id; }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::io;
}

json with_stage(json behavior, const std::string& stage, json steps) {
  behavior["stages"][stage] = std::move(steps);
  return behavior;
}

}  // namespace

TEST_CASE("dataset selection parsing") {
  CHECK(parse_dataset_selection(fixture::task_manager_answer()).name == "ToyChest");
  CHECK(parse_dataset_selection(R"(Pick: {"other": {"x": "}"}} then {"dataset name": "A {b}"} done)").name ==
        "A {b}");
  CHECK(parse_dataset_selection(R"(I'd go with "dataset name": "Kvasir" since...)").name == "Kvasir");
  auto none = parse_dataset_selection("There is no suitable dataset for this. <end>");
  CHECK(!none.name);
  CHECK(none.no_dataset);
  auto nothing = parse_dataset_selection("I could not decide.");
  CHECK(!nothing.name);
  CHECK(!nothing.no_dataset);
}

TEST_CASE("task kind inference and small helpers") {
  CHECK(infer_task_kind("Task type: diagnosis. Segmentation later") == TaskKind::diagnosis);
  CHECK(infer_task_kind("organ SEGMENTATION") == TaskKind::segmentation);
  CHECK(infer_task_kind("Report generation for x-rays") == TaskKind::report_generation);
  CHECK(!infer_task_kind("train something"));

  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
  CHECK(parse_final_metric("loss 1\nFINAL_METRIC dice=0.5\nFINAL_METRIC dice=0.81\n") == "dice=0.81");
  CHECK(!parse_final_metric("no metric here"));

  CHECK(valid_run_id("run-1_a.b"));
  CHECK(!valid_run_id(""));
  CHECK(!valid_run_id(".."));
  CHECK(!valid_run_id("a/b"));
}

TEST_CASE("stage budgets apportion any total") {
  const auto d = StageBudgets::apportion(100);
  CHECK(d.task_manager == 10);
  CHECK(d.data_engineer == 35);
  CHECK(d.module_architect == 30);
  CHECK(d.model_trainer == 25);
  for (int total = 4; total <= 600; ++total) {
    const auto b = StageBudgets::apportion(total);
    CHECK(b.total() == total);
    for (auto role : kPipelineRoles) CHECK(b.for_role(role) >= 1);
  }
  CHECK_THROWS_AS(StageBudgets::apportion(3), Error);
}

TEST_CASE("happy path runs all four stages") {
  if (!testsupport::python3_available()) return;
  World w;
  const auto refs_before = tree_snapshot(w.toy.root / "ReferenceFiles");
  const auto data_before = tree_snapshot(w.toy.dataset_dir);
  const auto cards_before = tree_snapshot(w.toy.root / "DataCard");

  std::vector<std::pair<AgentRole, PipelineState>> seen;
  PipelineConfig config;
  config.on_stage_begin = [&](AgentRole role, const PipelineState& s) { seen.emplace_back(role, s); };
  PipelineState final_state;
  const auto record = w.run(fixture::pipeline_behavior(), "r1", &final_state, config);

  CHECK(record.completed);
  REQUIRE(record.stages.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(record.stages[i].role == kPipelineRoles[i]);
    CHECK(record.stages[i].success);
    CHECK(record.stages[i].iterations == 1);
  }
  CHECK(record.final_metric == "accuracy=0.875");
  CHECK(record.halt_reason.empty());

  const auto dir = w.run_dir();
  CHECK(fs::is_regular_file(dir / "Logout/model.bin"));
  CHECK(fs::is_regular_file(dir / "Datapath/dataloader.py"));
  CHECK(testsupport::slurp(dir / "plan.md").find("ToyChest") != std::string::npos);
  CHECK(load_run_record(dir / "verdict.json") == record);

  // stage order in the transcript, one verdict per stage
  const auto events = load_transcript(dir / "transcript.jsonl");
  std::vector<std::string> verdicts;
  for (const auto& e : events) {
    if (e.kind == EventKind::verdict) verdicts.push_back(e.stage);
  }
  CHECK(verdicts == std::vector<std::string>{"task_manager", "data_engineer", "module_architect", "model_trainer"});
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == static_cast<long long>(i));

  // reference material untouched
  CHECK(tree_snapshot(w.toy.root / "ReferenceFiles") == refs_before);
  CHECK(tree_snapshot(w.toy.dataset_dir) == data_before);
  CHECK(tree_snapshot(w.toy.root / "DataCard") == cards_before);

  // state threading
  REQUIRE(seen.size() == 4);
  CHECK(seen[0].second.code_artifacts.empty());
  CHECK(seen[0].second.last_feedback.empty());
  CHECK(seen[0].second.stage_reports.empty());
  CHECK(!seen[0].second.plan.selected);
  CHECK(seen[1].second.plan.selected->name == "ToyChest");
  CHECK(seen[1].second.plan.task_kind == TaskKind::diagnosis);
  CHECK(seen[2].second.processor_msg.find("train.json") != std::string::npos);
  CHECK(seen[2].second.code_artifacts.count("Datapath/make_index.py") == 1);
  CHECK(seen[3].second.dataloader_msg.find("dataloader.py") != std::string::npos);
  CHECK(seen[3].second.stage_reports.size() == 3);
  CHECK(final_state.stage_reports.size() == 4);
  CHECK(final_state.last_feedback.find("FINAL_METRIC") != std::string::npos);
}

TEST_CASE("shell-only gated behavior completes or halts at the chosen stage") {
  World w;
  const std::map<std::string, AgentRole> failing = {{"b", AgentRole::data_engineer},
                                                    {"c", AgentRole::module_architect},
                                                    {"d", AgentRole::model_trainer}};
  const auto behavior = fixture::gated_behavior(failing);
  CHECK(w.run(behavior, "a").completed);
  const std::pair<std::string, std::size_t> halts[] = {{"b", 2}, {"c", 3}, {"d", 4}};
  for (const auto& [id, n] : halts) {
    const auto r = w.run(behavior, id);
    CHECK(!r.completed);
    CHECK(r.stages.size() == n);
    CHECK(!r.stages.back().success);
    CHECK(!r.final_metric);
    CHECK(r.halt_reason.rfind(std::string(to_string(kPipelineRoles[n - 1])), 0) == 0);
  }
  CHECK(load_run_record(w.run_dir("c") / "verdict.json").stages.back().reason == "last dataloader run exited 1");
  CHECK(load_run_record(w.run_dir("b") / "verdict.json").stages.back().reason == "missing train.json or test.json");
}

TEST_CASE("faults halt where they happen") {
  if (!testsupport::python3_available()) return;
  World w;
  auto r = w.run(fixture::pipeline_behavior(fixture::Fault::overlapping_splits), "overlap");
  CHECK(!r.completed);
  REQUIRE(r.stages.size() == 2);
  CHECK(!r.stages[1].success);
  CHECK(r.stages[1].reason.find("disjoint") != std::string::npos);
  CHECK(!fs::exists(w.run_dir("overlap") / "Datapath/dataloader.py"));

  r = w.run(fixture::pipeline_behavior(fixture::Fault::dataloader_fails), "loader");
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[2].status == AgentStatus::success);  // the agent ended, the check did not pass
  CHECK(!r.stages[2].success);

  r = w.run(fixture::pipeline_behavior(fixture::Fault::train_fails_once), "once");
  CHECK(r.completed);
  CHECK(r.stages[3].iterations == 2);

  r = w.run(fixture::pipeline_behavior(fixture::Fault::train_always_fails), "never");
  CHECK(!r.completed);
  CHECK(r.stages[3].status == AgentStatus::gave_up);
  CHECK(r.stages[3].iterations == 6);
}

TEST_CASE("no-dataset verdicts and wrong picks") {
  World w;
  const auto base = fixture::gated_behavior({});
  const auto none = with_stage(base, "task_manager",
                               json::array({fixture::text_step("No suitable dataset is registered for this. <end>")}));
  auto r = w.run(none, "none");
  CHECK(!r.completed);
  REQUIRE(r.stages.size() == 1);
  CHECK(r.stages[0].success);
  CHECK(r.halt_reason == "task_manager: no dataset fits the request");

  TaskRequest expecting;
  expecting.expected_dataset = "ToyChest";
  r = w.run(none, "none-expected", nullptr, {}, expecting);
  CHECK(!r.stages[0].success);

  r = w.run(base, "right", nullptr, {}, expecting);
  CHECK(r.completed);

  expecting.expected_dataset = "ToyLiver";
  r = w.run(base, "wrong", nullptr, {}, expecting);
  CHECK(r.stages.size() == 1);
  CHECK(r.stages[0].reason == "selected dataset \"ToyChest\", expected \"ToyLiver\"");

  const auto unknown = with_stage(base, "task_manager",
                                  json::array({fixture::text_step(fixture::task_manager_answer("Nope"))}));
  r = w.run(unknown, "unknown");
  CHECK(r.stages[0].reason == "selected dataset \"Nope\" is not registered");
}

TEST_CASE("backend trouble inside a stage is recorded, not thrown") {
  World w;
  auto behavior = fixture::gated_behavior({});
  behavior["stages"].erase("model_trainer");
  const auto r = w.run(behavior, "short");
  REQUIRE(r.stages.size() == 4);
  CHECK(r.stages[3].status == AgentStatus::backend_failure);
  CHECK(!r.completed);
  CHECK(fs::exists(w.run_dir("short") / "verdict.json"));
}

TEST_CASE("model artifact is required") {
  World w;
  const auto behavior = with_stage(
      fixture::gated_behavior({}), "model_trainer",
      json::array({fixture::call_step("write_files", {{"file", "train.sh"}, {"content", "echo trained\n"}}),
                   fixture::call_step("run_script", {{"command", "sh train.sh"}}),
                   fixture::text_step("done <end>")}));
  const auto r = w.run(behavior, "noart");
  CHECK(!r.completed);
  CHECK(r.stages[3].reason.find("model.bin is missing") != std::string::npos);
}

TEST_CASE("configuration problems throw before anything runs") {
  World w;
  const auto behavior = fixture::gated_behavior({});
  TaskRequest blank;
  blank.description = "   ";
  ScriptedBackend backend(ScriptedBehavior::from_json(behavior));
  blank.run_id = "blank";
  CHECK(code_of([&] { run_pipeline(blank, w.ws, backend, {}); }) == ErrorCode::config);
  CHECK(!fs::exists(w.run_dir("blank")));
  CHECK(code_of([&] { w.run(behavior, "../escape"); }) == ErrorCode::config);

  PipelineConfig bad_prompt;
  auto spec = default_agent_spec(AgentRole::data_engineer, 10);
  spec.system_prompt_template += " Also see {nonexistent_binding}.";
  bad_prompt.spec_overrides[AgentRole::data_engineer] = spec;
  try {
    w.run(behavior, "p", nullptr, bad_prompt);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("nonexistent_binding") != std::string::npos);
  }
  CHECK(!fs::exists(w.run_dir("p")));

  PipelineConfig zero;
  zero.budgets.module_architect = 0;
  CHECK(code_of([&] { w.run(behavior, "z", nullptr, zero); }) == ErrorCode::config);

  w.run(behavior, "dup");
  CHECK(code_of([&] { w.run(behavior, "dup"); }) == ErrorCode::config);
}

TEST_CASE("hand-off needs a summary and carries the stage output") {
  World w;
  PipelineState state;
  const auto r = w.run(fixture::gated_behavior({}), "h", &state);
  REQUIRE(r.completed);
  const auto dir = w.run_dir("h");

  StageReport report;
  report.role = AgentRole::data_engineer;
  report.summary = "  \n";
  CHECK(code_of([&] { hand_off(report, state, w.ws, dir); }) == ErrorCode::hand_off);

  report.summary = "split done";
  auto b = hand_off(report, state, w.ws, dir);
  CHECK(b.at("dataindex_path") == (dir / "Datapath").string());
  CHECK(b.at("processor_msg").find((dir / "Datapath/test.json").string()) != std::string::npos);
  CHECK(b.at("description") == w.ws.datacards[0].description);

  report.role = AgentRole::task_manager;
  b = hand_off(report, state, w.ws, dir);
  const auto sel = json::parse(b.at("selector_content"));
  CHECK(sel["dataset name"] == "ToyChest");
  CHECK(sel["dataset path"] == w.toy.dataset_dir.string());

  report.role = AgentRole::module_architect;
  b = hand_off(report, state, w.ws, dir);
  CHECK(b.at("dataloader_msg").find("Datapath/dataloader.py") != std::string::npos);
  CHECK(hand_off({AgentRole::model_trainer, {}, true, "", "x"}, state, w.ws, dir).empty());
}

TEST_CASE("concurrent runs stay in their own directories") {
  World w;
  const auto behavior = fixture::gated_behavior({{"r3", AgentRole::model_trainer}});
  std::vector<std::thread> threads;
  std::vector<RunRecord> records(6);
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&, i] {
      ScriptedBackend backend(ScriptedBehavior::from_json(behavior));
      TaskRequest req{"Diagnose pneumonia.", std::nullopt, "r" + std::to_string(i), "", "", std::nullopt};
      records[i] = run_pipeline(req, w.ws, backend, {});
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 6; ++i) {
    CHECK(records[i].completed == (i != 3));
    CHECK(fs::exists(w.run_dir("r" + std::to_string(i)) / "Logout/train.log") == (i != 3));
  }
}
