#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "medpipe/sandbox.hpp"

namespace medpipe {

enum class ToolName {
  list_files,
  read_files,
  copy_files,
  write_files,
  edit_files,
  run_script,
  preview_dirs,
  preview_files,
};

inline constexpr ToolName kAllTools[] = {
    ToolName::list_files,  ToolName::read_files, ToolName::copy_files,   ToolName::write_files,
    ToolName::edit_files,  ToolName::run_script, ToolName::preview_dirs, ToolName::preview_files,
};

std::string_view to_string(ToolName tool);
std::optional<ToolName> parse_tool_name(std::string_view name);

/// A decoded tool invocation. `tool_name` stays a string so calls to tools
/// that do not exist can still be represented and answered.
struct ToolCall {
  std::string call_id;
  std::string tool_name;
  nlohmann::json arguments = nlohmann::json::object();
};

enum class ToolStatus { ok, tool_error };

struct ToolResult {
  std::string call_id;
  ToolStatus status = ToolStatus::ok;
  std::string payload;
  bool truncated = false;
  std::optional<int> exit_code;  // run_script only
  bool timed_out = false;        // run_script only
};

inline constexpr std::size_t kListSkipThreshold = 1000;
inline constexpr std::size_t kPreviewDirMaxPaths = 100;
inline constexpr std::size_t kPreviewRows = 5;
inline constexpr std::size_t kPreviewWords = 10000;

struct ScriptReport {
  int exit_code = 0;  // 124 on timeout
  bool timed_out = false;
  double elapsed_seconds = 0.0;
  double timeout_seconds = 0.0;
  std::string output;
  std::size_t total_bytes = 0;
  bool truncated = false;

  /// `exit_code=<n>\n---\n<output>`; truncation and timeout are noted inside
  /// the output section.
  std::string render() const;
};

struct DirPreview {
  struct Subfolder {
    std::string name;
    std::size_t file_count = 0;
    std::vector<std::string> files;  // natural order, at most kPreviewDirMaxPaths
  };
  std::vector<Subfolder> subfolders;

  std::string render() const;
};

struct FilePreview {
  enum class Kind { csv, json, text };
  Kind kind = Kind::text;
  std::string header;               // csv only
  std::vector<std::string> items;   // rows, elements / "key": value pairs, or words
  std::size_t total = 0;            // data rows, elements, or words

  std::string render() const;
};

namespace tools {

std::string list_files(const Sandbox& sandbox, std::string_view dir);
std::string read_files(const Sandbox& sandbox, std::string_view file);
std::string copy_files(const Sandbox& sandbox, std::string_view src, std::string_view dst);
std::string write_files(const Sandbox& sandbox, std::string_view file, std::string_view content);
std::string edit_files(const Sandbox& sandbox, std::string_view file, std::string_view content);
ScriptReport run_script(const Sandbox& sandbox, std::string_view command);
DirPreview preview_dirs(const Sandbox& sandbox, std::string_view dir);
FilePreview preview_files(const Sandbox& sandbox, std::string_view file);

}  // namespace tools

/// Routes a call to its tool. Never throws: failures come back as
/// `tool_error` results whose payload is meant to be shown to the model.
ToolResult dispatch(const Sandbox& sandbox, const ToolCall& call) noexcept;

/// Chat-completion style schema ({"type": "function", "function": {...}}).
nlohmann::json tool_schema(ToolName tool);
nlohmann::json tool_schemas(const std::set<ToolName>& tools);

}  // namespace medpipe
