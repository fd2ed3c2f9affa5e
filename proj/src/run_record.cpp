#include "medpipe/run_record.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"
#include "medpipe/workspace.hpp"

namespace medpipe {

bool RunRecord::tokens_exact() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.tokens_exact; });
}

nlohmann::ordered_json RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["task"] = task;
  j["completed"] = completed;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    arr.push_back({{"role", std::string(to_string(s.role))},
                   {"success", s.success},
                   {"actions", s.actions},
                   {"iterations", s.iterations},
                   {"tokens", s.tokens},
                   {"reason", s.reason},
                   {"status", std::string(to_string(s.status))},
                   {"prompt_tokens", s.prompt_tokens},
                   {"completion_tokens", s.completion_tokens},
                   {"tokens_exact", s.tokens_exact}});
  }
  j["stages"] = std::move(arr);
  j["task_id"] = task_id;
  j["category"] = category;
  j["halt_reason"] = halt_reason;
  j["tokens_exact"] = tokens_exact();
  j["final_metric"] = final_metric ? nlohmann::ordered_json(*final_metric) : nullptr;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.completed = j.at("completed").get<bool>();
    for (const auto& s : j.at("stages")) {
      StageRecord st;
      const auto role = parse_agent_role(s.at("role").get<std::string>());
      if (!role) throw Error(ErrorCode::schema, "unknown role in verdict");
      st.role = *role;
      st.success = s.at("success").get<bool>();
      st.actions = s.at("actions").get<int>();
      st.iterations = s.at("iterations").get<int>();
      st.tokens = s.at("tokens").get<long long>();
      st.reason = s.at("reason").get<std::string>();
      if (auto status = parse_agent_status(s.value("status", std::string("success")))) st.status = *status;
      st.prompt_tokens = s.value("prompt_tokens", 0LL);
      st.completion_tokens = s.value("completion_tokens", 0LL);
      st.tokens_exact = s.value("tokens_exact", true);
      r.stages.push_back(std::move(st));
    }
    r.task_id = j.value("task_id", std::string());
    r.category = j.value("category", std::string());
    r.halt_reason = j.value("halt_reason", std::string());
    if (j.contains("final_metric") && j["final_metric"].is_string()) {
      r.final_metric = j["final_metric"].get<std::string>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, fmt::format("bad verdict: {}", e.what()));
  }
}

void save_run_record(const std::filesystem::path& file, const RunRecord& record) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << record.to_json().dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", file.string()));
}

RunRecord load_run_record(const std::filesystem::path& file) {
  const auto doc = nlohmann::json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::parse, fmt::format("{} is not valid JSON", file.string()));
  return RunRecord::from_json(doc);
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& runs_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(runs_dir, ec)) {
    throw Error(ErrorCode::not_found, fmt::format("runs directory {} not found", runs_dir.string()));
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "verdict.json")) {
      names.push_back(entry.path().filename().string());
    }
  }
  natural_sort(names);
  std::vector<RunRecord> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(load_run_record(runs_dir / n / "verdict.json"));
  return out;
}

}  // namespace medpipe
