#include "medpipe/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"

namespace medpipe {

PipelineState PipelineState::initial(TaskRequest task) {
  PipelineState state;
  state.task = std::move(task);
  state.plan.task_kind = state.task.task_kind;
  return state;
}

namespace {

// End of the balanced object starting at `open`, skipping string literals.
std::optional<std::size_t> object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::nullopt;
}

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_regular(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec);
}

}  // namespace

DatasetSelection parse_dataset_selection(std::string_view text) {
  DatasetSelection out;
  const std::string key(kDatacardNameKey);
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto close = object_end(text, open);
    if (!close) break;
    const auto doc = nlohmann::json::parse(text.substr(open, *close - open + 1), nullptr, false);
    if (doc.is_object() && doc.contains(key) && doc[key].is_string()) {
      out.name = doc[key].get<std::string>();
      return out;
    }
  }
  static const std::regex pair(R"re("dataset name"\s*:\s*"([^"]*)")re");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, pair)) {
    out.name = m[1].str();
    return out;
  }
  static const std::regex none(R"(\bno (suitable |matching )?dataset\b)", std::regex::icase);
  out.no_dataset = std::regex_search(text.begin(), text.end(), none);
  return out;
}

std::optional<TaskKind> infer_task_kind(std::string_view text) {
  const auto low = lower(text);
  std::optional<TaskKind> best;
  std::size_t best_pos = std::string::npos;
  const std::pair<std::string_view, TaskKind> words[] = {
      {"segmentation", TaskKind::segmentation},
      {"detection", TaskKind::detection},
      {"diagnosis", TaskKind::diagnosis},
      {"report generation", TaskKind::report_generation},
      {"report_generation", TaskKind::report_generation},
  };
  for (const auto& [word, kind] : words) {
    const auto pos = low.find(word);
    if (pos < best_pos) {
      best_pos = pos;
      best = kind;
    }
  }
  return best;
}

namespace {

StageCheck check_task_manager(const PipelineState& state, const AgentOutcome& outcome,
                              const Workspace& ws) {
  const auto pick = parse_dataset_selection(outcome.final_text);
  const auto& expected = state.task.expected_dataset;
  if (pick.name) {
    try {
      resolve_dataset(ws.datacards, *pick.name);
    } catch (const Error&) {
      return {false, fmt::format("selected dataset \"{}\" is not registered", *pick.name)};
    }
    if (expected && *expected != *pick.name) {
      return {false, fmt::format("selected dataset \"{}\", expected \"{}\"", *pick.name, *expected)};
    }
  } else if (pick.no_dataset) {
    if (expected) return {false, fmt::format("no dataset chosen, expected \"{}\"", *expected)};
  } else {
    return {false, "no dataset selection in the final message"};
  }
  if (outcome.final_text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return {false, "empty plan"};
  }
  return {true, pick.name ? fmt::format("selected {}", *pick.name) : "no dataset fits the request"};
}

StageCheck check_data_engineer(const fs::path& run_dir, const PipelineState& state,
                               const Workspace& ws) {
  if (!state.plan.selected) return {false, "no dataset selected"};
  const auto dir = run_dir / RunLayout::datapath;
  const auto index = DataIndexSet::in_directory(dir);
  if (!is_regular(index.train_path) || !is_regular(index.test_path)) {
    return {false, "missing train.json or test.json"};
  }
  std::vector<TaskKind> kinds;
  if (state.plan.task_kind) kinds.push_back(*state.plan.task_kind);
  else kinds.assign(std::begin(kAllTaskKinds), std::end(kAllTaskKinds));

  const auto root = ws.dataset_root(*state.plan.selected);
  std::string first_failure;
  for (auto kind : kinds) {
    const auto examples = ws.examples_dir / std::string(to_string(kind));
    if (!is_regular(examples / "train.json")) continue;
    try {
      const auto schema = IndexSchema::from_examples(examples);
      const auto report = validate_index_files(root, index, schema);
      if (report.passed()) {
        return {true, fmt::format("index files match the {} examples (train {}, test {})",
                                  to_string(kind), report.train_count, report.test_count)};
      }
      if (first_failure.empty()) first_failure = report.summary();
    } catch (const std::exception& e) {
      if (first_failure.empty()) first_failure = e.what();
    }
  }
  if (first_failure.empty()) return {false, "no index examples for the task kind"};
  return {false, first_failure};
}

StageCheck check_validation_run(const AgentOutcome& outcome, std::string_view what) {
  if (!outcome.last_validation_exit) return {false, fmt::format("{} was never run", what)};
  if (*outcome.last_validation_exit != 0) {
    return {false, fmt::format("last {} run exited {}", what, *outcome.last_validation_exit)};
  }
  return {true, {}};
}

}  // namespace

StageCheck detect_stage_success(AgentRole role, const fs::path& run_dir,
                                const PipelineState& state, const AgentOutcome& outcome,
                                const Workspace& workspace) {
  if (outcome.status != AgentStatus::success) {
    auto reason = std::string(to_string(outcome.status));
    if (!outcome.detail.empty()) reason += ": " + outcome.detail;
    return {false, reason};
  }
  try {
    switch (role) {
      case AgentRole::task_manager: return check_task_manager(state, outcome, workspace);
      case AgentRole::data_engineer: return check_data_engineer(run_dir, state, workspace);
      case AgentRole::module_architect: {
        if (!is_regular(run_dir / RunLayout::dataloader)) return {false, "missing dataloader"};
        auto check = check_validation_run(outcome, "dataloader");
        if (check.success) check.reason = "dataloader validated";
        return check;
      }
      case AgentRole::model_trainer: {
        auto check = check_validation_run(outcome, "training");
        if (!check.success) return check;
        if (!is_regular(run_dir / RunLayout::model_artifact)) {
          return {false, "training exited 0 but Logout/model.bin is missing"};
        }
        return {true, "training finished and the model artifact exists"};
      }
    }
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  return {false, "unknown role"};
}

Bindings hand_off(const StageReport& report, PipelineState& state, const Workspace& workspace,
                  const fs::path& run_dir) {
  if (report.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::hand_off,
                fmt::format("{} finished without a summary to hand off", to_string(report.role)));
  }
  Bindings out;
  switch (report.role) {
    case AgentRole::task_manager: {
      if (!state.plan.selected) {
        throw Error(ErrorCode::hand_off, "task manager hand-off without a selected dataset");
      }
      const auto& card = *state.plan.selected;
      nlohmann::ordered_json sel;
      sel[std::string(kDatacardNameKey)] = card.name;
      sel[std::string(kDatacardDescriptionKey)] = card.description;
      sel[std::string(kDatacardPathKey)] = workspace.dataset_root(card).string();
      state.plan.selector_message = sel.dump(2);
      out["selector_content"] = state.plan.selector_message;
      break;
    }
    case AgentRole::data_engineer: {
      const auto dir = run_dir / RunLayout::datapath;
      const auto index = DataIndexSet::in_directory(dir);
      std::string files = index.train_path.string() + "\n" + index.test_path.string();
      if (index.label_dict_path) files += "\n" + index.label_dict_path->string();
      state.processor_msg = fmt::format("{}\n\nIndex files:\n{}", report.summary, files);
      out["processor_msg"] = state.processor_msg;
      out["dataindex_path"] = dir.string();
      out["description"] = state.plan.selected ? state.plan.selected->description : "";
      break;
    }
    case AgentRole::module_architect: {
      state.module_output.dataloader_path = (run_dir / RunLayout::dataloader).string();
      state.module_output.summary = report.summary;
      state.dataloader_msg = fmt::format("{}\n\nDataloader: {}", report.summary,
                                         state.module_output.dataloader_path);
      out["dataloader_msg"] = state.dataloader_msg;
      break;
    }
    case AgentRole::model_trainer:
      break;
  }
  return out;
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

std::map<std::string, std::string> snapshot_code(const fs::path& run_dir,
                                                 const std::set<std::string>& extensions) {
  std::map<std::string, std::string> out;
  std::error_code ec;
  fs::recursive_directory_iterator it(run_dir, fs::directory_options::skip_permission_denied, ec);
  if (ec) return out;
  for (const auto& entry : it) {
    if (!entry.is_regular_file(ec) || entry.is_symlink(ec)) continue;
    auto ext = entry.path().extension().string();
    if (ext.empty()) continue;
    ext = lower(std::string_view(ext).substr(1));
    if (!extensions.count(ext)) continue;
    const auto rel = entry.path().lexically_relative(run_dir).generic_string();
    if (rel == RunLayout::verdict) continue;
    try {
      out[rel] = content_hash(read_text_file(entry.path()));
    } catch (const Error&) {
    }
  }
  return out;
}

std::optional<std::string> parse_final_metric(std::string_view output) {
  static const std::regex line(R"(FINAL_METRIC\s+([^=\s]+)=(\S+))");
  std::optional<std::string> last;
  for (std::regex_iterator<std::string_view::const_iterator> it(output.begin(), output.end(), line),
       end;
       it != end; ++it) {
    last = (*it)[1].str() + "=" + (*it)[2].str();
  }
  return last;
}

}  // namespace medpipe
