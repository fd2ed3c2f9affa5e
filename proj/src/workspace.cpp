#include "medpipe/workspace.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"

namespace medpipe {

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot open {}", file.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::io, fmt::format("failed reading {}", file.string()));
  return buf.str();
}

std::vector<Datacard> parse_datacards(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::schema, "datacard document must be a JSON array");
  std::vector<Datacard> cards;
  cards.reserve(doc.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    if (!entry.is_object()) {
      throw Error(ErrorCode::schema, fmt::format("datacard {} is not an object", i));
    }
    auto field = [&](std::string_view key) {
      const auto it = entry.find(std::string(key));
      if (it == entry.end()) {
        throw Error(ErrorCode::schema,
                    fmt::format("datacard {} is missing required key \"{}\"", i, key));
      }
      if (!it->is_string()) {
        throw Error(ErrorCode::schema,
                    fmt::format("datacard {}: key \"{}\" must be a string", i, key));
      }
      return it->get<std::string>();
    };
    Datacard card{field(kDatacardNameKey), field(kDatacardDescriptionKey),
                  fs::path(field(kDatacardPathKey))};
    if (card.name.empty()) {
      throw Error(ErrorCode::schema, fmt::format("datacard {} has an empty name", i));
    }
    if (!seen.insert(card.name).second) {
      throw Error(ErrorCode::schema,
                  fmt::format("datacard {}: duplicate dataset name \"{}\"", i, card.name));
    }
    cards.push_back(std::move(card));
  }
  return cards;
}

std::vector<Datacard> load_datacards(const fs::path& file) {
  const auto text = read_text_file(file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", file.string(), e.what()));
  }
  return parse_datacards(doc);
}

nlohmann::ordered_json datacards_to_json(const std::vector<Datacard>& cards) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& card : cards) {
    nlohmann::ordered_json entry;
    entry[std::string(kDatacardNameKey)] = card.name;
    entry[std::string(kDatacardDescriptionKey)] = card.description;
    entry[std::string(kDatacardPathKey)] = card.root_path.string();
    doc.push_back(std::move(entry));
  }
  return doc;
}

std::string serialize_datacards(const std::vector<Datacard>& cards) {
  return datacards_to_json(cards).dump(4) + "\n";
}

void save_datacards(const fs::path& file, const std::vector<Datacard>& cards) {
  fs::create_directories(file.parent_path());
  const auto tmp = fs::path(file).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", tmp.string()));
    out << serialize_datacards(cards);
  }
  fs::rename(tmp, file);
}

const Datacard& resolve_dataset(const std::vector<Datacard>& registry, std::string_view name) {
  const auto it = std::find_if(registry.begin(), registry.end(),
                               [&](const Datacard& c) { return c.name == name; });
  if (it == registry.end()) {
    throw Error(ErrorCode::not_found, fmt::format("dataset \"{}\" not found", name));
  }
  return *it;
}

fs::path resolve_dataset_root(const Datacard& card, const fs::path& workspace_root) {
  if (card.root_path.is_absolute()) return card.root_path.lexically_normal();
  return (workspace_root / card.root_path).lexically_normal();
}

void check_dataset_root(const Datacard& card, const fs::path& workspace_root) {
  const auto root = resolve_dataset_root(card, workspace_root);
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::not_found, fmt::format("dataset \"{}\": path {} is not a directory",
                                                  card.name, root.string()));
  }
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::segmentation: return "segmentation";
    case TaskKind::detection: return "detection";
    case TaskKind::diagnosis: return "diagnosis";
    case TaskKind::report_generation: return "report_generation";
  }
  return "unknown";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  for (auto kind : kAllTaskKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::dataloader: return "dataloader";
    case TemplateKind::train_script: return "train_script";
    case TemplateKind::train_shell: return "train_shell";
    case TemplateKind::index_example: return "index_example";
  }
  return "unknown";
}

namespace {

void scan_templates(const fs::path& dir, TemplateKind default_kind,
                    std::vector<TemplateRef>& out) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return;
  for (auto kind : kAllTaskKinds) {
    const auto sub = dir / std::string(to_string(kind));
    if (!fs::is_directory(sub, ec)) continue;
    std::vector<std::string> names;
    for (const auto& entry : fs::recursive_directory_iterator(sub)) {
      if (entry.is_regular_file()) names.push_back(entry.path().lexically_relative(sub).string());
    }
    natural_sort(names);
    for (const auto& name : names) {
      auto template_kind = default_kind;
      if (default_kind == TemplateKind::train_script && fs::path(name).extension() == ".sh") {
        template_kind = TemplateKind::train_shell;
      }
      out.push_back({kind, sub / name, template_kind});
    }
  }
}

}  // namespace

Workspace Workspace::load(const fs::path& root) {
  Workspace ws;
  ws.root = fs::absolute(root).lexically_normal();
  ws.datacards = load_datacards(ws.datacard_file());
  ws.examples_dir = ws.root / WorkspaceLayout::index_examples;
  ws.dataloader_dir = ws.root / WorkspaceLayout::dataloader_examples;
  ws.scripts_dir = ws.root / WorkspaceLayout::training_scripts;
  scan_templates(ws.examples_dir, TemplateKind::index_example, ws.templates);
  scan_templates(ws.dataloader_dir, TemplateKind::dataloader, ws.templates);
  scan_templates(ws.scripts_dir, TemplateKind::train_script, ws.templates);
  return ws;
}

DataIndexSet DataIndexSet::in_directory(const fs::path& dir) {
  DataIndexSet set{dir / "train.json", dir / "test.json", std::nullopt};
  if (fs::exists(dir / "label_dict.json")) set.label_dict_path = dir / "label_dict.json";
  return set;
}

bool looks_like_path(std::string_view value) {
  if (value.empty()) return false;
  if (value.find_first_of(" \t\r\n") != std::string_view::npos) return false;
  if (value.find('/') != std::string_view::npos) return true;
  const auto dot = value.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == value.size()) return false;
  const auto ext = value.substr(dot + 1);
  return std::all_of(ext.begin(), ext.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) != 0;
         }) &&
         std::any_of(ext.begin(), ext.end(),
                     [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
}

namespace {

bool holds_paths(const nlohmann::json& value) {
  if (value.is_string()) return looks_like_path(value.get_ref<const std::string&>());
  if (value.is_array() && !value.empty()) {
    return std::all_of(value.begin(), value.end(), [](const nlohmann::json& v) {
      return v.is_string() && looks_like_path(v.get_ref<const std::string&>());
    });
  }
  return false;
}

nlohmann::json parse_json_file(const fs::path& file, std::string* error) {
  const auto text = read_text_file(file);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    *error = fmt::format("{}: {}", file.filename().string(), e.what());
    return nlohmann::json(nlohmann::json::value_t::discarded);
  }
}

std::set<std::string> key_set(const nlohmann::json& object) {
  std::set<std::string> keys;
  for (const auto& [k, v] : object.items()) keys.insert(k);
  return keys;
}

std::string join(const std::set<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) {
    if (!out.empty()) out += ", ";
    out += k;
  }
  return "{" + out + "}";
}

bool is_within(const fs::path& root, const fs::path& p) {
  const auto rel = p.lexically_relative(root);
  return !rel.empty() && *rel.begin() != "..";
}

}  // namespace

IndexSchema IndexSchema::from_examples(const fs::path& example_dir) {
  IndexSchema schema;
  const auto train = example_dir / "train.json";
  std::string error;
  const auto doc = parse_json_file(train, &error);
  if (doc.is_discarded()) throw Error(ErrorCode::parse, error);
  if (!doc.is_array() || doc.empty() || !doc.front().is_object()) {
    throw Error(ErrorCode::schema,
                fmt::format("{} must be a non-empty array of objects", train.string()));
  }
  for (const auto& [key, value] : doc.front().items()) {
    schema.sample_keys.insert(key);
    if (holds_paths(value)) schema.path_keys.insert(key);
  }
  schema.has_label_dict = fs::exists(example_dir / "label_dict.json");
  return schema;
}

bool ValidationReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& c : checks) {
    if (c.passed) continue;
    if (!out.empty()) out += "; ";
    out += c.name + ": " + c.detail;
  }
  return out.empty() ? "all checks passed" : out;
}

ValidationReport validate_index_files(const fs::path& dataset_root, const DataIndexSet& index,
                                      const IndexSchema& schema) {
  ValidationReport report;
  auto add = [&](std::string_view name, bool ok, std::string detail) {
    report.checks.push_back({std::string(name), ok, std::move(detail)});
  };

  // Parseability. Missing files are I/O errors, not failed checks.
  std::string parse_errors;
  auto parse = [&](const fs::path& file) {
    std::string error;
    auto doc = parse_json_file(file, &error);
    if (doc.is_discarded()) {
      if (!parse_errors.empty()) parse_errors += "; ";
      parse_errors += error;
    }
    return doc;
  };
  const auto train = parse(index.train_path);
  const auto test = parse(index.test_path);
  nlohmann::json label_dict;
  if (index.label_dict_path) label_dict = parse(*index.label_dict_path);
  if (parse_errors.empty()) {
    if (!train.is_array() || !test.is_array()) {
      parse_errors = "train.json and test.json must be JSON arrays";
    } else if (index.label_dict_path && !label_dict.is_object()) {
      parse_errors = "label_dict.json must be a JSON object";
    }
  }
  add(check_names::parseable, parse_errors.empty(), parse_errors);

  const bool label_dict_ok = index.label_dict_path.has_value() == schema.has_label_dict;
  const std::string label_dict_detail =
      label_dict_ok ? std::string{}
      : schema.has_label_dict
          ? std::string("the example set has label_dict.json but none was produced")
          : std::string("label_dict.json produced although the example set has none");

  if (!parse_errors.empty()) {
    const std::string skipped = "skipped: index files did not parse";
    add(check_names::non_empty, false, skipped);
    add(check_names::key_set, false, skipped);
    add(check_names::paths_exist, false, skipped);
    add(check_names::disjoint, false, skipped);
    add(check_names::label_dict, label_dict_ok, label_dict_detail);
    return report;
  }

  report.train_count = train.size();
  report.test_count = test.size();
  add(check_names::non_empty, !train.empty() && !test.empty(),
      train.empty() ? "train.json is empty" : (test.empty() ? "test.json is empty" : ""));

  std::string key_detail;
  auto check_keys = [&](const nlohmann::json& split, std::string_view split_name) {
    for (std::size_t i = 0; i < split.size() && key_detail.empty(); ++i) {
      if (!split[i].is_object()) {
        key_detail = fmt::format("{}[{}] is not an object", split_name, i);
      } else if (const auto keys = key_set(split[i]); keys != schema.sample_keys) {
        key_detail = fmt::format("{}[{}] has keys {}, expected {}", split_name, i, join(keys),
                                 join(schema.sample_keys));
      }
    }
  };
  check_keys(train, "train");
  check_keys(test, "test");
  add(check_names::key_set, key_detail.empty(), key_detail);

  const auto root = fs::weakly_canonical(fs::absolute(dataset_root));
  std::string path_detail;
  std::size_t missing = 0;
  auto check_path = [&](const std::string& value) {
    fs::path p(value);
    if (p.is_relative()) p = root / p;
    std::error_code ec;
    const auto resolved = fs::weakly_canonical(p, ec);
    const bool ok = !ec && is_within(root, resolved) && fs::exists(resolved, ec);
    if (!ok) {
      if (missing++ == 0) path_detail = fmt::format("\"{}\" does not exist under {}", value,
                                                    root.string());
    }
  };
  for (const auto* split : {&train, &test}) {
    for (const auto& sample : *split) {
      if (!sample.is_object()) continue;
      for (const auto& key : schema.path_keys) {
        const auto it = sample.find(key);
        if (it == sample.end()) continue;
        if (it->is_string()) {
          check_path(it->get<std::string>());
        } else if (it->is_array()) {
          for (const auto& v : *it) {
            if (v.is_string()) check_path(v.get<std::string>());
          }
        }
      }
    }
  }
  if (missing > 1) path_detail += fmt::format(" (and {} more)", missing - 1);
  add(check_names::paths_exist, missing == 0, path_detail);

  // A sample is identified by its path-valued fields, or by its whole body
  // when the schema has no path keys.
  auto sample_id = [&](const nlohmann::json& sample) {
    if (schema.path_keys.empty() || !sample.is_object()) return sample.dump();
    nlohmann::json id = nlohmann::json::object();
    for (const auto& key : schema.path_keys) {
      if (const auto it = sample.find(key); it != sample.end()) id[key] = *it;
    }
    return id.dump();
  };
  std::unordered_set<std::string> train_ids;
  for (const auto& s : train) train_ids.insert(sample_id(s));
  std::size_t overlap = 0;
  std::string overlap_detail;
  for (const auto& s : test) {
    if (train_ids.count(sample_id(s)) != 0) {
      if (overlap++ == 0) overlap_detail = "sample " + sample_id(s) + " is in both splits";
    }
  }
  if (overlap > 1) overlap_detail += fmt::format(" ({} overlapping samples)", overlap);
  add(check_names::disjoint, overlap == 0, overlap_detail);

  add(check_names::label_dict, label_dict_ok, label_dict_detail);
  return report;
}

}  // namespace medpipe
