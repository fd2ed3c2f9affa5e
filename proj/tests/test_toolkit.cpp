#include <sys/stat.h>
#include <unistd.h>

#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"
#include "medpipe/toolkit.hpp"
#include "test_support.hpp"

using namespace medpipe;
using testsupport::slurp;
using testsupport::spit;
using testsupport::TempDir;
using json = nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::io;
}

ToolResult call(const Sandbox& sb, const std::string& name, json args, std::string id = "c1") {
  return dispatch(sb, ToolCall{std::move(id), name, std::move(args)});
}

}  // namespace

TEST_CASE("list_files keeps code files only") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  for (auto f : {"a.py", "b.rs", "img.png", "c.CPP", "noext"}) spit(sb.root() / f, "x");
  CHECK(tools::list_files(sb, ".") == "a.py\nb.rs\nc.CPP");
  fs::create_directories(sb.root() / "empty");
  CHECK(tools::list_files(sb, "empty").empty());
  CHECK(code_of([&] { tools::list_files(sb, "missing"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { tools::list_files(sb, "../"); }) == ErrorCode::sandbox);
}

TEST_CASE("list_files skips directories with more than 1000 files") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  spit(sb.root() / "top.py", "");
  for (int i = 0; i < 1001; ++i) spit(sb.root() / "big" / ("f" + std::to_string(i) + ".py"), "");
  spit(sb.root() / "big" / "nested" / "deep.py", "");
  for (int i = 0; i < 1000; ++i) spit(sb.root() / "edge" / ("g" + std::to_string(i) + ".txt"), "");
  const auto out = tools::list_files(sb, ".");
  std::vector<std::string> lines;
  std::istringstream in(out);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  CHECK(lines.size() == 1001);  // top.py + 1000 from edge/
  CHECK(out.find("big/") == std::string::npos);
  CHECK(lines.front() == "edge/g0.txt");
  CHECK(lines.back() == "top.py");
  CHECK(std::is_sorted(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return natural_less(a, b); }));
}

TEST_CASE("list_files never reports a path whose parent is over the threshold") {
  TempDir tmp;
  std::mt19937 rng(3);
  Sandbox sb(tmp / "root");
  std::map<std::string, int> direct;
  for (int d = 0; d < 6; ++d) {
    const std::string dir = "d" + std::to_string(d) + (d % 2 ? "/inner" : "");
    const int n = (rng() % 3 == 0) ? 1001 + static_cast<int>(rng() % 5) : static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) spit(sb.root() / dir / ("f" + std::to_string(i) + ".py"), "");
  }
  std::istringstream in(tools::list_files(sb, "."));
  for (std::string line; std::getline(in, line);) {
    const auto parent = (sb.root() / line).parent_path();
    int files = 0;
    for (const auto& e : fs::directory_iterator(parent)) files += e.is_regular_file() ? 1 : 0;
    CHECK(files <= 1000);
  }
}

TEST_CASE("read_files and write_files") {
  TempDir tmp;
  SandboxLimits limits;
  limits.read_cap = 64;
  Sandbox sb(tmp / "root", {}, limits);
  tools::write_files(sb, "abc.txt", "abc");
  CHECK(tools::read_files(sb, "abc.txt") == "abc");
  tools::write_files(sb, "x/y/z.py", "print(1)\n");
  CHECK(slurp(sb.root() / "x/y/z.py") == "print(1)\n");
  tools::write_files(sb, "empty.txt", "");
  CHECK(fs::file_size(sb.root() / "empty.txt") == 0);
  CHECK(code_of([&] { tools::read_files(sb, "missing.txt"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { tools::write_files(sb, "../evil.sh", "x"); }) == ErrorCode::sandbox);
  CHECK(!fs::exists(tmp / "evil.sh"));
  CHECK(code_of([&] { tools::write_files(sb, "x", "dir!"); }) == ErrorCode::invalid_target);

  spit(sb.root() / "at_cap.txt", std::string(64, 'a'));
  CHECK(tools::read_files(sb, "at_cap.txt").size() == 64);
  spit(sb.root() / "big.txt", std::string(65, 'a'));
  try {
    tools::read_files(sb, "big.txt");
    FAIL("expected too_large");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_large);
    CHECK(std::string(e.what()).find("preview_files") != std::string::npos);
  }
}

TEST_CASE("write then read is the identity on random UTF-8") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  std::mt19937 rng(17);
  const char32_t pool[] = {U'a', U'\n', U'\t', U' ', U'{', U'"', U'\\', U'é', U'中', U'😀', U' ', U'0'};
  for (int i = 0; i < 100; ++i) {
    std::string text;
    const int n = static_cast<int>(rng() % 200);
    for (int k = 0; k < n; ++k) {
      const char32_t c = pool[rng() % std::size(pool)];
      if (c < 0x80) {
        text += static_cast<char>(c);
      } else if (c < 0x800) {
        text += static_cast<char>(0xC0 | (c >> 6));
        text += static_cast<char>(0x80 | (c & 0x3F));
      } else if (c < 0x10000) {
        text += static_cast<char>(0xE0 | (c >> 12));
        text += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        text += static_cast<char>(0x80 | (c & 0x3F));
      } else {
        text += static_cast<char>(0xF0 | (c >> 18));
        text += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        text += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        text += static_cast<char>(0x80 | (c & 0x3F));
      }
    }
    const auto name = "f" + std::to_string(i) + ".txt";
    tools::write_files(sb, name, text);
    CHECK(tools::read_files(sb, name) == text);
  }
}

TEST_CASE("edit_files replaces existing files only") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  tools::write_files(sb, "a.py", "old content that is long");
  tools::edit_files(sb, "a.py", "new");
  CHECK(slurp(sb.root() / "a.py") == "new");
  tools::edit_files(sb, "a.py", "new");
  CHECK(slurp(sb.root() / "a.py") == "new");
  CHECK(code_of([&] { tools::edit_files(sb, "nope.py", "x"); }) == ErrorCode::not_found);
  CHECK(!fs::exists(sb.root() / "nope.py"));
}

TEST_CASE("copy_files creates parents and keeps metadata") {
  TempDir tmp;
  spit(tmp / "ref/train.sh", "#!/bin/sh\necho hi\n");
  ::chmod((tmp / "ref/train.sh").c_str(), 0750);
  const auto old_time = fs::last_write_time(tmp / "ref/train.sh") - std::chrono::hours(30);
  fs::last_write_time(tmp / "ref/train.sh", old_time);
  Sandbox sb(tmp / "root", {tmp / "ref"});

  tools::copy_files(sb, (tmp / "ref/train.sh").string(), "a/b/c.sh");
  const auto dst = sb.root() / "a/b/c.sh";
  CHECK(slurp(dst) == slurp(tmp / "ref/train.sh"));
  CHECK(fs::last_write_time(dst) == old_time);
  CHECK((fs::status(dst).permissions() & fs::perms::all) ==
        (fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec));

  CHECK(code_of([&] { tools::copy_files(sb, "a/b/c.sh", "a/b/c.sh"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { tools::copy_files(sb, "missing", "x"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { tools::copy_files(sb, "a/b/c.sh", (tmp / "ref/out.sh").string()); }) ==
        ErrorCode::sandbox);
  CHECK(!fs::exists(tmp / "ref/out.sh"));

  fs::create_directories(sb.root() / "into");
  tools::copy_files(sb, "a/b/c.sh", "into");
  CHECK(fs::exists(sb.root() / "into/c.sh"));
}

TEST_CASE("run_script reports exit codes as data") {
  TempDir tmp;
  SandboxLimits limits;
  limits.script_timeout = std::chrono::milliseconds(700);
  limits.output_cap = 100;
  Sandbox sb(tmp / "root", {}, limits);

  auto r = call(sb, "run_script", {{"command", "echo hi"}});
  CHECK(r.status == ToolStatus::ok);
  CHECK(r.exit_code == 0);
  CHECK(r.payload == "exit_code=0\n---\nhi\n");

  r = call(sb, "run_script", {{"command", "echo 'Traceback: boom' >&2; exit 1"}});
  CHECK(r.status == ToolStatus::ok);
  CHECK(r.exit_code == 1);
  CHECK(r.payload.find("Traceback: boom") != std::string::npos);

  r = call(sb, "run_script", {{"command", "pwd"}});
  CHECK(r.payload.find(sb.root().string()) != std::string::npos);

  r = call(sb, "run_script", {{"command", "seq 1 1000"}});
  CHECK(r.truncated);
  CHECK(r.payload.find("[output truncated: showing last 100 of 3893 bytes]") != std::string::npos);
  CHECK(r.payload.size() < 200);
  CHECK(r.payload.substr(r.payload.size() - 4) == "000\n");

  const auto t0 = std::chrono::steady_clock::now();
  r = call(sb, "run_script", {{"command", "echo start; sleep 30"}});
  const auto waited = std::chrono::steady_clock::now() - t0;
  CHECK(waited < std::chrono::seconds(5));
  CHECK(r.status == ToolStatus::ok);
  CHECK(r.timed_out);
  CHECK(r.exit_code == 124);
  CHECK(r.payload.find("start") != std::string::npos);
  CHECK(r.payload.find("[timeout: killed after") != std::string::npos);
  CHECK(r.payload.find("(limit 1 s)") != std::string::npos);

  r = call(sb, "run_script", {{"command", "   "}});
  CHECK(r.status == ToolStatus::tool_error);
  CHECK(code_of([&] { tools::run_script(sb, ""); }) == ErrorCode::invalid_argument);
}

TEST_CASE("preview_dirs counts everything and lists 100 paths in natural order") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  for (int i = 0; i < 150; ++i) spit(sb.root() / "data/big" / ("img" + std::to_string(i) + ".npy"), "");
  spit(sb.root() / "data/small/img10.png", "");
  spit(sb.root() / "data/small/img2.png", "");
  spit(sb.root() / "data/loose.csv", "");
  const auto p = tools::preview_dirs(sb, "data");
  REQUIRE(p.subfolders.size() == 2);
  CHECK(p.subfolders[0].name == "big");
  CHECK(p.subfolders[0].file_count == 150);
  REQUIRE(p.subfolders[0].files.size() == 100);
  CHECK(p.subfolders[0].files[0] == "img0.npy");
  CHECK(p.subfolders[0].files[99] == "img99.npy");
  CHECK(p.subfolders[1].files == std::vector<std::string>{"img2.png", "img10.png"});

  const auto rendered = json::parse(p.render());
  CHECK(rendered["big"]["file_count"] == 150);
  CHECK(rendered["big"]["files"].size() == 100);

  fs::create_directories(sb.root() / "none");
  CHECK(tools::preview_dirs(sb, "none").subfolders.empty());
  CHECK(code_of([&] { tools::preview_dirs(sb, "data/loose.csv"); }) == ErrorCode::invalid_target);
}

TEST_CASE("preview_files on csv, json and text") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  std::string csv = "id,label\n";
  for (int i = 0; i < 7; ++i) csv += std::to_string(i) + ",x\n";
  spit(sb.root() / "rows.csv", csv);
  auto p = tools::preview_files(sb, "rows.csv");
  CHECK(p.kind == FilePreview::Kind::csv);
  CHECK(p.header == "id,label");
  CHECK(p.items.size() == 5);
  CHECK(p.items[4] == "4,x");
  CHECK(p.total == 7);

  spit(sb.root() / "quoted.csv", "a,b\n1,\"two\nlines\"\n\n2,c\n");
  p = tools::preview_files(sb, "quoted.csv");
  CHECK(p.total == 2);
  CHECK(p.items[0] == "1,\"two\nlines\"");

  spit(sb.root() / "three.json", R"([{"a":1},{"b":2},{"c":3}])");
  p = tools::preview_files(sb, "three.json");
  CHECK(p.kind == FilePreview::Kind::json);
  CHECK(p.items.size() == 3);
  CHECK(p.total == 3);

  spit(sb.root() / "obj.json", R"({"k1":1,"k2":2,"k3":3,"k4":4,"k5":5,"k6":6,"k7":[7]})");
  p = tools::preview_files(sb, "obj.json");
  CHECK(p.items.size() == 5);
  CHECK(p.items[0] == "\"k1\": 1");
  CHECK(p.total == 7);

  std::string text;
  for (int i = 0; i < 12000; ++i) text += "w" + std::to_string(i) + (i % 17 ? " " : "\n");
  spit(sb.root() / "notes.md", text);
  p = tools::preview_files(sb, "notes.md");
  CHECK(p.kind == FilePreview::Kind::text);
  CHECK(p.items.size() == 10000);
  CHECK(p.items.back() == "w9999");
  CHECK(p.total == 12000);
  const auto rendered = json::parse(p.render());
  CHECK(rendered["total_words"] == 12000);

  CHECK(code_of([&] { tools::preview_files(sb, "nope.csv"); }) == ErrorCode::not_found);
}

TEST_CASE("preview_files counts match an independent full scan") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  std::mt19937 rng(9);
  for (int round = 0; round < 40; ++round) {
    const int rows = static_cast<int>(rng() % 20);
    std::string csv = "h1,h2\n";
    for (int i = 0; i < rows; ++i) csv += "v,w\n";
    const int words = static_cast<int>(rng() % 30);
    std::string text;
    for (int i = 0; i < words; ++i) text += std::string(1 + rng() % 4, 'z') + (rng() % 3 ? " " : "\n\t");
    json arr = json::array();
    const int elems = static_cast<int>(rng() % 12);
    for (int i = 0; i < elems; ++i) arr.push_back(i);
    const auto base = std::to_string(round);
    spit(sb.root() / (base + ".csv"), csv);
    spit(sb.root() / (base + ".txt"), text);
    spit(sb.root() / (base + ".json"), arr.dump());

    // oracle: raw line count minus header, stream word count, parsed size
    std::istringstream lines(csv), ws(text);
    int line_count = 0, word_count = 0;
    for (std::string l; std::getline(lines, l);) line_count += l.empty() ? 0 : 1;
    for (std::string w; ws >> w;) ++word_count;
    CHECK(tools::preview_files(sb, base + ".csv").total == static_cast<std::size_t>(line_count - 1));
    CHECK(tools::preview_files(sb, base + ".txt").total == static_cast<std::size_t>(word_count));
    CHECK(tools::preview_files(sb, base + ".json").total == json::parse(arr.dump()).size());
  }
}

TEST_CASE("dispatch routes and never throws") {
  TempDir tmp;
  Sandbox sb(tmp / "root");
  spit(sb.root() / "a.py", "x");
  auto r = call(sb, "list_files", {{"dir", "."}});
  CHECK(r.status == ToolStatus::ok);
  CHECK(r.payload == "a.py");
  CHECK(r.call_id == "c1");

  r = call(sb, "write_files", {{"file", "../../escape.py"}, {"content", "x"}});
  CHECK(r.status == ToolStatus::tool_error);
  CHECK(r.payload.find("sandbox") != std::string::npos);

  r = call(sb, "rm_rf", json::object());
  CHECK(r.status == ToolStatus::tool_error);
  CHECK(r.payload.find("unknown tool") != std::string::npos);

  r = call(sb, "read_files", json::object());
  CHECK(r.status == ToolStatus::tool_error);
  CHECK(r.payload.find("file") != std::string::npos);

  r = call(sb, "read_files", json::array());
  CHECK(r.status == ToolStatus::tool_error);

  std::mt19937 rng(1);
  const std::vector<std::string> names = {"list_files", "read_files", "copy_files", "write_files",
                                          "edit_files", "preview_dirs", "preview_files", "bogus", ""};
  const std::vector<json> values = {"", ".", "..", "/", "/etc/passwd", "a.py", "x/../../y", 3, nullptr,
                                    json::array(), "\xff\xfe"};
  for (int i = 0; i < 300; ++i) {
    json args = json::object();
    for (auto key : {"dir", "file", "src", "dst", "content"}) {
      if (rng() % 2) args[key] = values[rng() % values.size()];
    }
    const auto id = "fuzz" + std::to_string(i);
    ToolResult res;
    CHECK_NOTHROW(res = call(sb, names[rng() % names.size()], args, id));
    CHECK(res.call_id == id);
  }
}

TEST_CASE("sandbox follows symlinks before checking containment") {
  TempDir tmp;
  fs::create_directories(tmp / "outside");
  Sandbox sb(tmp / "root", {tmp / "readonly"});
  spit(tmp / "readonly/info.txt", "ro");
  fs::create_directory_symlink(tmp / "outside", sb.root() / "link");
  fs::create_symlink(tmp / "outside/dangling.txt", sb.root() / "dangle");

  CHECK(code_of([&] { tools::write_files(sb, "link/x.txt", "x"); }) == ErrorCode::sandbox);
  CHECK(code_of([&] { tools::write_files(sb, "dangle", "x"); }) == ErrorCode::sandbox);
  CHECK(fs::is_empty(tmp / "outside"));
  CHECK(tools::read_files(sb, (tmp / "readonly/info.txt").string()) == "ro");
  CHECK(code_of([&] { tools::write_files(sb, (tmp / "readonly/info.txt").string(), "w"); }) ==
        ErrorCode::sandbox);
  CHECK(code_of([&] { tools::read_files(sb, (tmp / "outside").string()); }) == ErrorCode::sandbox);
  tools::write_files(sb, (sb.root() / "abs.txt").string(), "ok");
  CHECK(slurp(sb.root() / "abs.txt") == "ok");
}

TEST_CASE("tool schemas describe each tool") {
  const auto all = tool_schemas({std::begin(kAllTools), std::end(kAllTools)});
  REQUIRE(all.size() == 8);
  std::set<std::string> names;
  for (const auto& s : all) {
    CHECK(s["type"] == "function");
    names.insert(s["function"]["name"].get<std::string>());
    CHECK(s["function"]["parameters"]["type"] == "object");
  }
  CHECK(names.count("preview_files") == 1);
  CHECK(tool_schema(ToolName::copy_files)["function"]["parameters"]["required"] == json({"src", "dst"}));
  CHECK(tool_schemas({ToolName::read_files}).size() == 1);
}
