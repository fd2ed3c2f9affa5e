#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace medpipe {

namespace fs = std::filesystem;

/// On-disk datacard keys. They keep their spaced spelling for compatibility
/// with existing datacard files.
inline constexpr std::string_view kDatacardNameKey = "dataset name";
inline constexpr std::string_view kDatacardDescriptionKey = "dataset description";
inline constexpr std::string_view kDatacardPathKey = "dataset path";

struct Datacard {
  std::string name;
  std::string description;
  fs::path root_path;  // absolute, or relative to the workspace root

  bool operator==(const Datacard&) const = default;
};

/// Parses a datacard array. Order is preserved; names must be non-empty and
/// unique. Path existence is not checked here (see `check_dataset_root`).
std::vector<Datacard> parse_datacards(const nlohmann::json& doc);
std::vector<Datacard> load_datacards(const fs::path& file);

nlohmann::ordered_json datacards_to_json(const std::vector<Datacard>& cards);
std::string serialize_datacards(const std::vector<Datacard>& cards);
void save_datacards(const fs::path& file, const std::vector<Datacard>& cards);

/// Exact, case-sensitive lookup. Throws not_found carrying the name.
const Datacard& resolve_dataset(const std::vector<Datacard>& registry, std::string_view name);

fs::path resolve_dataset_root(const Datacard& card, const fs::path& workspace_root);

/// Registration-time invariant: the resolved root exists and is a directory.
void check_dataset_root(const Datacard& card, const fs::path& workspace_root);

enum class TaskKind { segmentation, detection, diagnosis, report_generation };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view text);
inline constexpr TaskKind kAllTaskKinds[] = {TaskKind::segmentation, TaskKind::detection,
                                             TaskKind::diagnosis, TaskKind::report_generation};

enum class TemplateKind { dataloader, train_script, train_shell, index_example };

std::string_view to_string(TemplateKind kind);

struct TemplateRef {
  TaskKind task_kind;
  fs::path path;
  TemplateKind kind;
};

/// Directory vocabulary of an initialized workspace.
struct WorkspaceLayout {
  static constexpr std::string_view datacard_file = "DataCard/descriptions.json";
  static constexpr std::string_view index_examples = "ReferenceFiles/DataJsonExamples";
  static constexpr std::string_view dataloader_examples = "ReferenceFiles/DataLoaderExamples";
  static constexpr std::string_view training_scripts = "ReferenceFiles/TrainingScripts";
  static constexpr std::string_view runs = "runs";
};

struct Workspace {
  fs::path root;
  std::vector<Datacard> datacards;
  std::vector<TemplateRef> templates;
  fs::path examples_dir;    // data-index JSON examples, one subfolder per task kind
  fs::path dataloader_dir;  // dataloader examples, one subfolder per task kind
  fs::path scripts_dir;     // training script templates, one subfolder per task kind

  fs::path datacard_file() const { return root / WorkspaceLayout::datacard_file; }
  fs::path dataset_root(const Datacard& card) const { return resolve_dataset_root(card, root); }

  /// Loads datacards and scans the reference folders for templates.
  static Workspace load(const fs::path& root);
};

struct DataIndexSet {
  fs::path train_path;
  fs::path test_path;
  std::optional<fs::path> label_dict_path;

  /// train.json / test.json / label_dict.json (if present) inside `dir`.
  static DataIndexSet in_directory(const fs::path& dir);
};

/// The structure an index set must reproduce: per-sample key set, which of
/// those keys hold data paths, and whether a label dictionary belongs to it.
struct IndexSchema {
  std::set<std::string> sample_keys;
  std::set<std::string> path_keys;
  bool has_label_dict = false;

  /// Derives the schema from an example folder (train.json, optional
  /// label_dict.json).
  static IndexSchema from_examples(const fs::path& example_dir);
};

/// Heuristic used to decide which example values are data paths: no
/// whitespace, and either a directory separator or a file extension.
bool looks_like_path(std::string_view value);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  std::size_t train_count = 0;
  std::size_t test_count = 0;

  bool passed() const;
  const CheckResult* find(std::string_view name) const;
  std::string summary() const;
};

namespace check_names {
inline constexpr std::string_view parseable = "parseable";
inline constexpr std::string_view non_empty = "non_empty";
inline constexpr std::string_view key_set = "key_set";
inline constexpr std::string_view paths_exist = "paths_exist";
inline constexpr std::string_view disjoint = "disjoint";
inline constexpr std::string_view label_dict = "label_dict";
}  // namespace check_names

/// Runs every structural check on an index set. A file that cannot be read at
/// all raises an io error; everything else is reported as a failed check.
ValidationReport validate_index_files(const fs::path& dataset_root, const DataIndexSet& index,
                                      const IndexSchema& schema);

std::string read_text_file(const fs::path& file);

}  // namespace medpipe
