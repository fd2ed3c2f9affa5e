#include "medpipe/toolkit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>

#include "medpipe/error.hpp"
#include "medpipe/natural_sort.hpp"
#include "medpipe/process.hpp"
#include "medpipe/workspace.hpp"

namespace medpipe {

std::string_view to_string(ToolName tool) {
  switch (tool) {
    case ToolName::list_files: return "list_files";
    case ToolName::read_files: return "read_files";
    case ToolName::copy_files: return "copy_files";
    case ToolName::write_files: return "write_files";
    case ToolName::edit_files: return "edit_files";
    case ToolName::run_script: return "run_script";
    case ToolName::preview_dirs: return "preview_dirs";
    case ToolName::preview_files: return "preview_files";
  }
  return "unknown";
}

std::optional<ToolName> parse_tool_name(std::string_view name) {
  for (auto tool : kAllTools) {
    if (to_string(tool) == name) return tool;
  }
  return std::nullopt;
}

namespace {

std::string lower_extension(const fs::path& p) {
  auto ext = p.extension().string();
  if (!ext.empty() && ext.front() == '.') ext.erase(0, 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool is_regular_no_follow(const fs::directory_entry& entry) {
  std::error_code ec;
  return fs::is_regular_file(entry.symlink_status(ec));
}

bool is_dir_no_follow(const fs::directory_entry& entry) {
  std::error_code ec;
  return fs::is_directory(entry.symlink_status(ec));
}

fs::path existing_directory(const Sandbox& sandbox, std::string_view dir) {
  const auto resolved = sandbox.resolve_read(dir);
  std::error_code ec;
  if (!fs::exists(resolved, ec)) {
    throw Error(ErrorCode::not_found, fmt::format("directory {} does not exist", dir));
  }
  if (!fs::is_directory(resolved, ec)) {
    throw Error(ErrorCode::invalid_target, fmt::format("{} is not a directory", dir));
  }
  return resolved;
}

fs::path existing_file(const Sandbox& sandbox, std::string_view file) {
  const auto resolved = sandbox.resolve_read(file);
  std::error_code ec;
  if (!fs::exists(resolved, ec)) {
    throw Error(ErrorCode::not_found, fmt::format("file {} does not exist", file));
  }
  if (!fs::is_regular_file(resolved, ec)) {
    throw Error(ErrorCode::invalid_target, fmt::format("{} is not a regular file", file));
  }
  return resolved;
}

void write_bytes(const fs::path& target, std::string_view content) {
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot open {} for writing", target.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::io, fmt::format("failed writing {}", target.string()));
}

void scan_code_files(const fs::path& dir, const fs::path& base,
                     const std::set<std::string>& extensions, std::vector<std::string>& out) {
  std::vector<fs::directory_entry> files;
  std::vector<fs::path> subdirs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (is_regular_no_follow(entry)) {
      files.push_back(entry);
    } else if (is_dir_no_follow(entry)) {
      subdirs.push_back(entry.path());
    }
  }
  if (files.size() > kListSkipThreshold) return;
  for (const auto& f : files) {
    if (extensions.count(lower_extension(f.path())) != 0) {
      out.push_back(f.path().lexically_relative(base).generic_string());
    }
  }
  for (const auto& sub : subdirs) scan_code_files(sub, base, extensions, out);
}

void collect_files(const fs::path& dir, const fs::path& base, std::vector<std::string>& out) {
  std::error_code ec;
  for (const auto& entry : fs::recursive_directory_iterator(dir, ec)) {
    if (is_regular_no_follow(entry)) out.push_back(entry.path().lexically_relative(base).generic_string());
  }
}

// Splits CSV records on newlines outside double quotes; blank records are
// dropped.
template <typename Sink>
void for_each_csv_record(std::istream& in, Sink&& sink) {
  std::string record;
  bool quoted = false;
  char c;
  auto flush = [&] {
    if (!record.empty() && record.back() == '\r') record.pop_back();
    if (!record.empty()) sink(record);
    record.clear();
  };
  while (in.get(c)) {
    if (c == '"') quoted = !quoted;
    if (c == '\n' && !quoted) {
      flush();
      continue;
    }
    record.push_back(c);
  }
  flush();
}

}  // namespace

std::string ScriptReport::render() const {
  std::string body;
  if (truncated) {
    body += fmt::format("[output truncated: showing last {} of {} bytes]\n", output.size(),
                        total_bytes);
  }
  body += output;
  if (timed_out) {
    if (!body.empty() && body.back() != '\n') body += '\n';
    body += fmt::format("[timeout: killed after {:.2f} s (limit {:.0f} s)]", elapsed_seconds,
                        timeout_seconds);
  }
  return fmt::format("exit_code={}\n---\n{}", exit_code, body);
}

std::string DirPreview::render() const {
  auto doc = nlohmann::ordered_json::object();
  for (const auto& sub : subfolders) {
    doc[sub.name] = {{"file_count", sub.file_count}, {"files", sub.files}};
  }
  return doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string FilePreview::render() const {
  nlohmann::ordered_json doc;
  switch (kind) {
    case Kind::csv:
      doc["type"] = "csv";
      doc["header"] = header;
      doc["rows"] = items;
      doc["total_rows"] = total;
      break;
    case Kind::json:
      doc["type"] = "json";
      doc["preview"] = items;
      doc["total_count"] = total;
      break;
    case Kind::text: {
      std::string words;
      for (const auto& w : items) {
        if (!words.empty()) words += ' ';
        words += w;
      }
      doc["type"] = "text";
      doc["preview"] = words;
      doc["total_words"] = total;
      break;
    }
  }
  return doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace tools {

std::string list_files(const Sandbox& sandbox, std::string_view dir) {
  const auto root = existing_directory(sandbox, dir);
  std::vector<std::string> paths;
  scan_code_files(root, root, sandbox.limits().code_extensions, paths);
  natural_sort(paths);
  std::string out;
  for (const auto& p : paths) {
    if (!out.empty()) out += '\n';
    out += p;
  }
  return out;
}

std::string read_files(const Sandbox& sandbox, std::string_view file) {
  const auto path = existing_file(sandbox, file);
  const auto size = fs::file_size(path);
  if (size > sandbox.limits().read_cap) {
    throw Error(ErrorCode::too_large,
                fmt::format("{} is {} bytes, over the read limit of {} bytes; use preview_files "
                            "to inspect it",
                            file, size, sandbox.limits().read_cap));
  }
  return read_text_file(path);
}

std::string copy_files(const Sandbox& sandbox, std::string_view src, std::string_view dst) {
  const auto from = existing_file(sandbox, src);
  auto to = sandbox.resolve_write(dst);
  std::error_code ec;
  if (fs::is_directory(to, ec)) {
    to = sandbox.resolve_write((to / from.filename()).string());
  }
  if (from == to || (fs::exists(to, ec) && fs::equivalent(from, to, ec))) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("source and destination are the same file: {}", src));
  }
  fs::create_directories(to.parent_path());
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
  fs::permissions(to, fs::status(from).permissions(), fs::perm_options::replace);
  fs::last_write_time(to, fs::last_write_time(from));
  return fmt::format("copied {} to {}", src, dst);
}

std::string write_files(const Sandbox& sandbox, std::string_view file, std::string_view content) {
  const auto target = sandbox.resolve_write(file);
  std::error_code ec;
  if (fs::is_directory(target, ec)) {
    throw Error(ErrorCode::invalid_target, fmt::format("{} is a directory", file));
  }
  fs::create_directories(target.parent_path());
  write_bytes(target, content);
  return fmt::format("wrote {} bytes to {}", content.size(), file);
}

std::string edit_files(const Sandbox& sandbox, std::string_view file, std::string_view content) {
  const auto target = sandbox.resolve_write(file);
  std::error_code ec;
  if (!fs::exists(target, ec)) {
    throw Error(ErrorCode::not_found,
                fmt::format("{} does not exist; use write_files to create it", file));
  }
  if (!fs::is_regular_file(target, ec)) {
    throw Error(ErrorCode::invalid_target, fmt::format("{} is not a regular file", file));
  }
  write_bytes(target, content);
  return fmt::format("replaced {} with {} bytes", file, content.size());
}

ScriptReport run_script(const Sandbox& sandbox, std::string_view command) {
  if (command.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::invalid_argument, "empty command");
  }
  const auto& limits = sandbox.limits();
  const auto result = run_shell(std::string(command), sandbox.root(), limits.script_timeout,
                                limits.output_cap);
  ScriptReport report;
  report.exit_code = result.exit_code;
  report.timed_out = result.timed_out;
  report.elapsed_seconds = std::chrono::duration<double>(result.elapsed).count();
  report.timeout_seconds = std::chrono::duration<double>(limits.script_timeout).count();
  report.output = result.output;
  report.total_bytes = result.total_bytes;
  report.truncated = result.truncated;
  return report;
}

DirPreview preview_dirs(const Sandbox& sandbox, std::string_view dir) {
  const auto resolved = sandbox.resolve_read(dir);
  std::error_code ec;
  if (!fs::is_directory(resolved, ec)) {
    throw Error(ErrorCode::invalid_target, fmt::format("{} is not a directory", dir));
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(resolved)) {
    if (is_dir_no_follow(entry)) names.push_back(entry.path().filename().string());
  }
  natural_sort(names);
  DirPreview preview;
  for (const auto& name : names) {
    std::vector<std::string> files;
    collect_files(resolved / name, resolved / name, files);
    natural_sort(files);
    DirPreview::Subfolder sub{name, files.size(), {}};
    const auto shown = std::min(files.size(), kPreviewDirMaxPaths);
    sub.files.assign(files.begin(), files.begin() + static_cast<std::ptrdiff_t>(shown));
    preview.subfolders.push_back(std::move(sub));
  }
  return preview;
}

FilePreview preview_files(const Sandbox& sandbox, std::string_view file) {
  const auto path = existing_file(sandbox, file);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot open {}", file));
  FilePreview preview;
  const auto ext = lower_extension(path);
  if (ext == "csv") {
    preview.kind = FilePreview::Kind::csv;
    bool have_header = false;
    for_each_csv_record(in, [&](const std::string& record) {
      if (!have_header) {
        preview.header = record;
        have_header = true;
        return;
      }
      if (preview.items.size() < kPreviewRows) preview.items.push_back(record);
      ++preview.total;
    });
  } else if (ext == "json") {
    preview.kind = FilePreview::Kind::json;
    nlohmann::ordered_json doc;
    try {
      doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::parse, fmt::format("{}: {}", file, e.what()));
    }
    if (doc.is_array()) {
      preview.total = doc.size();
      for (std::size_t i = 0; i < doc.size() && i < kPreviewRows; ++i) {
        preview.items.push_back(doc[i].dump());
      }
    } else if (doc.is_object()) {
      preview.total = doc.size();
      for (auto it = doc.begin(); it != doc.end() && preview.items.size() < kPreviewRows; ++it) {
        preview.items.push_back(nlohmann::json(it.key()).dump() + ": " + it.value().dump());
      }
    } else {
      preview.total = 1;
      preview.items.push_back(doc.dump());
    }
  } else {
    preview.kind = FilePreview::Kind::text;
    std::string word;
    while (in >> word) {
      if (preview.items.size() < kPreviewWords) preview.items.push_back(word);
      ++preview.total;
    }
  }
  if (in.bad()) throw Error(ErrorCode::io, fmt::format("failed reading {}", file));
  return preview;
}

}  // namespace tools

namespace {

std::string string_arg(const ToolCall& call, const char* name) {
  const auto it = call.arguments.find(name);
  if (it == call.arguments.end()) {
    throw Error(ErrorCode::invalid_argument, fmt::format("missing argument \"{}\"", name));
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::invalid_argument, fmt::format("argument \"{}\" must be a string", name));
  }
  return it->get<std::string>();
}

ToolResult run_tool(const Sandbox& sandbox, ToolName tool, const ToolCall& call) {
  ToolResult result{call.call_id, ToolStatus::ok, {}, false, std::nullopt, false};
  switch (tool) {
    case ToolName::list_files:
      result.payload = tools::list_files(sandbox, string_arg(call, "dir"));
      break;
    case ToolName::read_files:
      result.payload = tools::read_files(sandbox, string_arg(call, "file"));
      break;
    case ToolName::copy_files:
      result.payload = tools::copy_files(sandbox, string_arg(call, "src"), string_arg(call, "dst"));
      break;
    case ToolName::write_files:
      result.payload =
          tools::write_files(sandbox, string_arg(call, "file"), string_arg(call, "content"));
      break;
    case ToolName::edit_files:
      result.payload =
          tools::edit_files(sandbox, string_arg(call, "file"), string_arg(call, "content"));
      break;
    case ToolName::run_script: {
      const auto report = tools::run_script(sandbox, string_arg(call, "command"));
      result.payload = report.render();
      result.truncated = report.truncated;
      result.exit_code = report.exit_code;
      result.timed_out = report.timed_out;
      break;
    }
    case ToolName::preview_dirs:
      result.payload = tools::preview_dirs(sandbox, string_arg(call, "dir")).render();
      break;
    case ToolName::preview_files:
      result.payload = tools::preview_files(sandbox, string_arg(call, "file")).render();
      break;
  }
  return result;
}

}  // namespace

ToolResult dispatch(const Sandbox& sandbox, const ToolCall& call) noexcept {
  auto failure = [&](std::string message) {
    return ToolResult{call.call_id, ToolStatus::tool_error, std::move(message), false,
                      std::nullopt, false};
  };
  try {
    const auto tool = parse_tool_name(call.tool_name);
    if (!tool) return failure(fmt::format("unknown tool \"{}\"", call.tool_name));
    if (!call.arguments.is_object()) return failure("arguments must be a JSON object");
    return run_tool(sandbox, *tool, call);
  } catch (const Error& e) {
    return failure(fmt::format("{}: {}", call.tool_name, e.what()));
  } catch (const fs::filesystem_error& e) {
    return failure(fmt::format("{}: I/O error: {}", call.tool_name, e.what()));
  } catch (const std::exception& e) {
    return failure(fmt::format("{}: {}", call.tool_name, e.what()));
  } catch (...) {
    return failure(fmt::format("{}: unexpected failure", call.tool_name));
  }
}

nlohmann::json tool_schema(ToolName tool) {
  auto param = [](const char* description) {
    return nlohmann::ordered_json{{"type", "string"}, {"description", description}};
  };
  std::string description;
  auto properties = nlohmann::ordered_json::object();
  switch (tool) {
    case ToolName::list_files:
      description =
          "Recursively list code files (.py, .sh, .json, ...) under a directory, one path per "
          "line. Directories holding more than 1000 files are skipped.";
      properties["dir"] = param("Directory to scan.");
      break;
    case ToolName::read_files:
      description = "Return the full UTF-8 text of a file. Large files must use preview_files.";
      properties["file"] = param("File to read.");
      break;
    case ToolName::copy_files:
      description =
          "Copy one file, creating destination folders and keeping timestamps and permissions.";
      properties["src"] = param("Source file.");
      properties["dst"] = param("Destination file or directory inside the working directory.");
      break;
    case ToolName::write_files:
      description = "Create a file with the given content, creating parent folders as needed.";
      properties["file"] = param("File to create.");
      properties["content"] = param("Full file content.");
      break;
    case ToolName::edit_files:
      description = "Replace the entire content of an existing file.";
      properties["file"] = param("Existing file to overwrite.");
      properties["content"] = param("New full file content.");
      break;
    case ToolName::run_script:
      description =
          "Run a shell command in the working directory. Returns the exit code and the combined "
          "stdout/stderr.";
      properties["command"] = param("Shell command line.");
      break;
    case ToolName::preview_dirs:
      description =
          "For each immediate subfolder, report its file count and up to 100 file paths in "
          "natural order.";
      properties["dir"] = param("Directory to inspect.");
      break;
    case ToolName::preview_files:
      description =
          "Summarize a data file: CSV shows the first 5 rows and the row count, JSON the first 5 "
          "elements or key-value pairs and the count, text the first 10000 words and the word "
          "count.";
      properties["file"] = param("File to preview.");
      break;
  }
  // declaration order, not key order
  auto required = nlohmann::json::array();
  for (const auto& [key, value] : properties.items()) required.push_back(key);
  return {{"type", "function"},
          {"function",
           {{"name", std::string(to_string(tool))},
            {"description", description},
            {"parameters",
             {{"type", "object"}, {"properties", nlohmann::json(properties)}, {"required", required}}}}}};
}

nlohmann::json tool_schemas(const std::set<ToolName>& tools) {
  auto out = nlohmann::json::array();
  for (auto tool : kAllTools) {
    if (tools.count(tool) != 0) out.push_back(tool_schema(tool));
  }
  return out;
}

}  // namespace medpipe
