#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "medpipe/agent.hpp"

namespace medpipe::fixture {

namespace fs = std::filesystem;

inline constexpr std::string_view kToyDataset = "ToyChest";
inline constexpr std::string_view kToySegDataset = "ToyLiver";

struct ToyWorkspace {
  fs::path root;
  fs::path dataset_dir;  // ToyChest: class0/, class1/, labels.csv
  int samples = 0;
};

/// A ready workspace: two registered datasets (ToyChest for diagnosis with a
/// relative path, ToyLiver for segmentation with an absolute one), index
/// examples for diagnosis (with label_dict) and segmentation (without), a
/// dataloader example and a training stub that needs nothing but /bin/sh.
ToyWorkspace build_toy_workspace(const fs::path& root, int samples = 40);

/// Sample paths of the toy dataset relative to its root, natural order.
std::vector<std::string> toy_sample_paths(int samples);

/// The no-op training launcher: writes Logout/train.log with a falling loss,
/// Logout/model.bin, and prints a FINAL_METRIC line.
std::string train_stub_script();

enum class Fault {
  none,
  overlapping_splits,   // data engineer writes a sample into both splits
  dataloader_fails,     // module architect's validation run exits 1, then it ends anyway
  train_fails_once,     // model trainer: broken launcher, fix, rerun
  train_always_fails,   // model trainer: six failing launches
};

/// Full four-stage scripted behavior on the toy workspace (uses python3 for
/// the index script and the dataloader).
nlohmann::json pipeline_behavior(Fault fault = Fault::none);

/// Behavior using only /bin/sh. `failing` maps run ids to the stage that
/// must fail for that run (data_engineer, module_architect or model_trainer).
nlohmann::json gated_behavior(const std::map<std::string, AgentRole>& failing, int samples = 40);

/// Scripted steps helpers.
nlohmann::json call_step(const std::string& tool, nlohmann::json args);
nlohmann::json text_step(const std::string& text);

std::string task_manager_answer(std::string_view dataset = kToyDataset);

void write_json(const fs::path& file, const nlohmann::json& doc);
void write_text(const fs::path& file, std::string_view text);

}  // namespace medpipe::fixture
