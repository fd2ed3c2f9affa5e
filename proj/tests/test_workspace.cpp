#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "fixture.hpp"
#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"
#include "medpipe/workspace.hpp"
#include "test_support.hpp"

using namespace medpipe;
using testsupport::TempDir;
using json = nlohmann::json;

namespace {

const char* kFourteen[] = {"BTCV",    "VerSe",   "L2R-OASIS", "COVID19", "INSTANCE2022",
                           "MSD Pancreas", "ChestX-Det10", "ADNI", "KneeMRI", "CC-CCII",
                           "CT-Kidney", "CT-RATE", "BrainGenome", "IU_Xray"};

json fourteen_cards() {
  json doc = json::array();
  for (const char* name : kFourteen) {
    doc.push_back({{"dataset name", name},
                   {"dataset description", std::string(name) + " description"},
                   {"dataset path", std::string("/path/to/") + name}});
  }
  return doc;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::io;
}

std::string random_name(std::mt19937& rng) {
  static const std::string alphabet = "ab09xZ-_. ";
  std::uniform_int_distribution<int> len(0, 6), pick(0, static_cast<int>(alphabet.size()) - 1);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
  return s;
}

}  // namespace

TEST_CASE("natural sort orders digit runs numerically") {
  std::vector<std::string> v = {"img10", "img2", "img1", "a", "img02"};
  natural_sort(v);
  CHECK(v == std::vector<std::string>{"a", "img1", "img02", "img2", "img10"});
  CHECK(natural_less("img2", "img10"));
  CHECK_FALSE(natural_less("img10", "img2"));
  CHECK(natural_less("file01", "file1"));  // equal numbers fall back to bytes
  CHECK_FALSE(natural_less("x", "x"));
}

TEST_CASE("natural sort is a strict weak order on random names") {
  std::mt19937 rng(11);
  std::vector<std::string> names;
  for (int i = 0; i < 120; ++i) names.push_back(random_name(rng));
  for (const auto& a : names) {
    CHECK_FALSE(natural_less(a, a));
    for (const auto& b : names) {
      if (natural_less(a, b)) CHECK_FALSE(natural_less(b, a));
      if (!natural_less(a, b) && !natural_less(b, a)) CHECK(a == b);  // full tiebreak
    }
  }
  for (int i = 0; i < 2000; ++i) {
    const auto& a = names[rng() % names.size()];
    const auto& b = names[rng() % names.size()];
    const auto& c = names[rng() % names.size()];
    if (natural_less(a, b) && natural_less(b, c)) CHECK(natural_less(a, c));
  }
  // pure numbers compare as numbers
  for (int i = 0; i < 300; ++i) {
    const unsigned x = rng() % 5000, y = rng() % 5000;
    CHECK(natural_less(std::to_string(x), std::to_string(y)) == (x < y));
  }
}

TEST_CASE("load_datacards reads the fourteen-card registry in order") {
  TempDir tmp;
  testsupport::spit(tmp / "cards.json", fourteen_cards().dump(4));
  const auto cards = load_datacards(tmp / "cards.json");
  REQUIRE(cards.size() == 14);
  for (std::size_t i = 0; i < 14; ++i) {
    CHECK(cards[i].name == kFourteen[i]);
    CHECK(cards[i].description == std::string(kFourteen[i]) + " description");
    CHECK(cards[i].root_path == fs::path("/path/to/") / kFourteen[i]);
  }
}

TEST_CASE("load_datacards edge cases") {
  TempDir tmp;
  testsupport::spit(tmp / "empty.json", "[]");
  CHECK(load_datacards(tmp / "empty.json").empty());

  testsupport::spit(tmp / "missing.json",
                    R"([{"dataset name": "A", "dataset description": "d"}])");
  try {
    load_datacards(tmp / "missing.json");
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
    CHECK(std::string(e.what()).find("dataset path") != std::string::npos);
    CHECK(std::string(e.what()).find('0') != std::string::npos);
  }

  testsupport::spit(tmp / "bad.json", "[{");
  CHECK(code_of([&] { load_datacards(tmp / "bad.json"); }) == ErrorCode::parse);

  json dup = fourteen_cards();
  dup.push_back(dup[0]);
  CHECK(code_of([&] { parse_datacards(dup); }) == ErrorCode::schema);
}

TEST_CASE("datacard serialization round-trips") {
  std::mt19937 rng(5);
  for (int round = 0; round < 50; ++round) {
    std::vector<Datacard> cards;
    std::set<std::string> used;
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      auto name = "ds" + std::to_string(i) + random_name(rng);
      if (!used.insert(name).second) continue;
      cards.push_back({name, random_name(rng) + "\n\"quoted\" é", random_name(rng) + "/x"});
    }
    const auto text = serialize_datacards(cards);
    CHECK(parse_datacards(json::parse(text)) == cards);
    const auto j = json::parse(text);
    for (const auto& entry : j) CHECK(entry.size() == 3);
  }
}

TEST_CASE("resolve_dataset is exact and case-sensitive") {
  const auto cards = parse_datacards(fourteen_cards());
  CHECK(resolve_dataset(cards, "ADNI").name == "ADNI");
  try {
    resolve_dataset(cards, "adni");
    FAIL("expected not_found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
    CHECK(std::string(e.what()).find("adni") != std::string::npos);
  }
  CHECK(code_of([&] { resolve_dataset(cards, ""); }) == ErrorCode::not_found);
}

TEST_CASE("relative dataset roots resolve against the workspace") {
  Datacard rel{"a", "d", "datasets/a"};
  Datacard abs{"b", "d", "/data/b"};
  CHECK(resolve_dataset_root(rel, "/ws") == fs::path("/ws/datasets/a"));
  CHECK(resolve_dataset_root(abs, "/ws") == fs::path("/data/b"));
  TempDir tmp;
  CHECK(code_of([&] { check_dataset_root(rel, tmp.path()); }) == ErrorCode::not_found);
  fs::create_directories(tmp / "datasets/a");
  CHECK_NOTHROW(check_dataset_root(rel, tmp.path()));
}

TEST_CASE("Workspace::load finds datacards and templates") {
  TempDir tmp;
  const auto toy = fixture::build_toy_workspace(tmp.path());
  const auto ws = Workspace::load(toy.root);
  REQUIRE(ws.datacards.size() == 2);
  CHECK(ws.datacards[0].name == fixture::kToyDataset);
  CHECK(ws.dataset_root(ws.datacards[0]) == toy.dataset_dir);
  const auto has = [&](TemplateKind kind, TaskKind task) {
    return std::any_of(ws.templates.begin(), ws.templates.end(), [&](const TemplateRef& t) {
      return t.kind == kind && t.task_kind == task && fs::is_regular_file(t.path);
    });
  };
  CHECK(has(TemplateKind::dataloader, TaskKind::diagnosis));
  CHECK(has(TemplateKind::train_shell, TaskKind::diagnosis));
  CHECK(has(TemplateKind::train_script, TaskKind::diagnosis));
  CHECK(has(TemplateKind::index_example, TaskKind::segmentation));
}

// ---- index validation against an independent brute-force oracle ----

namespace {

// Re-reads every file, stats every referenced path, intersects ids.
bool oracle_valid(const fs::path& dataset_root, const fs::path& dir, const fs::path& example_dir) {
  auto read = [](const fs::path& p) { return json::parse(testsupport::slurp(p), nullptr, false); };
  const auto ex = read(example_dir / "train.json");
  std::set<std::string> keys, path_keys;
  for (auto it = ex[0].begin(); it != ex[0].end(); ++it) {
    keys.insert(it.key());
    if (it->is_string() && it->get<std::string>().find('/') != std::string::npos) path_keys.insert(it.key());
  }
  const bool ex_has_dict = fs::exists(example_dir / "label_dict.json");
  if (!fs::exists(dir / "train.json") || !fs::exists(dir / "test.json")) return false;
  const auto train = read(dir / "train.json");
  const auto test = read(dir / "test.json");
  if (!train.is_array() || !test.is_array() || train.empty() || test.empty()) return false;
  if (fs::exists(dir / "label_dict.json") != ex_has_dict) return false;
  if (ex_has_dict && !read(dir / "label_dict.json").is_object()) return false;
  std::set<std::string> train_ids;
  for (const auto* split : {&train, &test}) {
    for (const auto& s : *split) {
      if (!s.is_object()) return false;
      std::set<std::string> k;
      for (auto it = s.begin(); it != s.end(); ++it) k.insert(it.key());
      if (k != keys) return false;
      std::string id;
      for (const auto& pk : path_keys) {
        const auto v = s[pk].get<std::string>();
        if (!fs::is_regular_file(dataset_root / v)) return false;
        id += v + "\n";
      }
      if (split == &train) train_ids.insert(id);
      else if (train_ids.count(id)) return false;
    }
  }
  return true;
}

json toy_split(int samples, bool test_part) {
  json out = json::array();
  const auto paths = fixture::toy_sample_paths(samples);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if ((i % 5 == 4) != test_part) continue;
    out.push_back({{"image", paths[i]}, {"label", paths[i][5] - '0'}});
  }
  return out;
}

}  // namespace

TEST_CASE("validate_index_files on the 32/8 toy split") {
  TempDir tmp;
  const auto toy = fixture::build_toy_workspace(tmp.path());
  const auto dir = tmp / "index";
  fixture::write_json(dir / "train.json", toy_split(40, false));
  fixture::write_json(dir / "test.json", toy_split(40, true));
  fixture::write_json(dir / "label_dict.json", {{"class0", 0}, {"class1", 1}});
  const auto examples = toy.root / WorkspaceLayout::index_examples / "diagnosis";
  const auto schema = IndexSchema::from_examples(examples);
  CHECK(schema.sample_keys == std::set<std::string>{"image", "label"});
  CHECK(schema.path_keys == std::set<std::string>{"image"});
  CHECK(schema.has_label_dict);

  const auto report = validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir), schema);
  CHECK(report.passed());
  CHECK(report.train_count == 32);
  CHECK(report.test_count == 8);
  CHECK(oracle_valid(toy.dataset_dir, dir, examples));
  for (auto name : {check_names::parseable, check_names::non_empty, check_names::key_set,
                    check_names::paths_exist, check_names::disjoint, check_names::label_dict}) {
    REQUIRE(report.find(name) != nullptr);
    CHECK(report.find(name)->passed);
  }
}

TEST_CASE("validate_index_files failing checks") {
  TempDir tmp;
  const auto toy = fixture::build_toy_workspace(tmp.path());
  const auto examples = toy.root / WorkspaceLayout::index_examples;
  const auto dir = tmp / "index";
  auto train = toy_split(40, false);
  auto test = toy_split(40, true);

  SUBCASE("overlap breaks disjointness") {
    test.push_back(train[0]);
    fixture::write_json(dir / "train.json", train);
    fixture::write_json(dir / "test.json", test);
    fixture::write_json(dir / "label_dict.json", {{"class0", 0}});
    const auto r = validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir),
                                        IndexSchema::from_examples(examples / "diagnosis"));
    CHECK_FALSE(r.passed());
    CHECK_FALSE(r.find(check_names::disjoint)->passed);
    CHECK(r.find(check_names::paths_exist)->passed);
  }
  SUBCASE("label_dict where the example set has none") {
    json seg_train = json::array({{{"image", "class0/s000.npy"}, {"mask", "class0/s001.npy"}}});
    json seg_test = json::array({{{"image", "class1/s020.npy"}, {"mask", "class1/s021.npy"}}});
    fixture::write_json(dir / "train.json", seg_train);
    fixture::write_json(dir / "test.json", seg_test);
    fixture::write_json(dir / "label_dict.json", {{"liver", 1}});
    const auto r = validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir),
                                        IndexSchema::from_examples(examples / "segmentation"));
    CHECK_FALSE(r.find(check_names::label_dict)->passed);
    CHECK(r.find(check_names::key_set)->passed);
  }
  SUBCASE("unreadable file is an io error, not a failed check") {
    fixture::write_json(dir / "train.json", train);
    CHECK(code_of([&] {
            validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir),
                                 IndexSchema::from_examples(examples / "diagnosis"));
          }) == ErrorCode::io);
  }
  SUBCASE("malformed json is a failed parse check") {
    testsupport::spit(dir / "train.json", "[{");
    fixture::write_json(dir / "test.json", test);
    fixture::write_json(dir / "label_dict.json", {{"class0", 0}});
    const auto r = validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir),
                                        IndexSchema::from_examples(examples / "diagnosis"));
    CHECK_FALSE(r.find(check_names::parseable)->passed);
  }
}

TEST_CASE("validate_index_files agrees with the brute-force oracle on random mutations") {
  TempDir tmp;
  const auto toy = fixture::build_toy_workspace(tmp.path());
  const auto examples = toy.root / WorkspaceLayout::index_examples / "diagnosis";
  const auto schema = IndexSchema::from_examples(examples);
  std::mt19937 rng(2024);
  int passes = 0, failures = 0;
  for (int round = 0; round < 200; ++round) {
    const auto dir = tmp / ("m" + std::to_string(round));
    auto train = toy_split(40, false);
    auto test = toy_split(40, true);
    bool dict = true;
    const int mutations = static_cast<int>(rng() % 3);
    for (int m = 0; m < mutations; ++m) {
      switch (rng() % 7) {
        case 0: train[rng() % train.size()]["image"] = "class0/nope.npy"; break;
        case 1: test.push_back(train[rng() % train.size()]); break;
        case 2: train[rng() % train.size()].erase("label"); break;
        case 3:
          if (!test.empty()) test[rng() % test.size()]["extra"] = 1;
          break;
        case 4: dict = !dict; break;
        case 5: test = json::array(); break;
        case 6: train[rng() % train.size()]["image"] = "../outside.npy"; break;
      }
    }
    fixture::write_json(dir / "train.json", train);
    fixture::write_json(dir / "test.json", test);
    if (dict) fixture::write_json(dir / "label_dict.json", {{"class0", 0}, {"class1", 1}});
    const bool got = validate_index_files(toy.dataset_dir, DataIndexSet::in_directory(dir), schema).passed();
    const bool want = oracle_valid(toy.dataset_dir, dir, examples);
    CHECK(got == want);
    (got ? passes : failures)++;
  }
  CHECK(passes > 10);
  CHECK(failures > 10);
}
