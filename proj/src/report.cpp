#include "medpipe/report.hpp"

#include <fmt/format.h>

#include <cmath>

#include "medpipe/error.hpp"

namespace medpipe {

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  if (text == "csv") return ReportFormat::csv;
  return std::nullopt;
}

ReportTables build_report_tables(const std::vector<RunRecord>& records, AverageMode mode) {
  return {aggregate_completion(records, mode), role_metrics(records)};
}

std::string format_tokens(double tokens) {
  const double k = tokens / 1000.0;
  if (std::round(k * 10.0) / 10.0 < 10.0) return fmt::format("{:.1f}k", k);
  return fmt::format("{:.0f}k", k);
}

namespace {

std::string cat_label(const std::string& c) { return c.empty() ? "-" : c; }

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    first = false;
    out += csv_field(f);
  }
  return out + "\n";
}

std::string pct(double v) { return fmt::format("{:.2f}", round2(v)); }

std::string render_markdown(const ReportTables& t) {
  const auto& c = t.completion;
  std::string out = "## Task completion\n\n| Category | Task | Completed |\n|---|---|---|\n";
  for (const auto& task : c.tasks) {
    out += fmt::format("| {} | {} | {} |\n", cat_label(task.category), task.task_id, task.cell.str());
  }
  out += "\n| Category | Completed | Percent |\n|---|---|---|\n";
  for (const auto& row : c.categories) {
    out += fmt::format("| {} | {} | {} |\n", cat_label(row.category), row.cell.str(), pct(row.percent));
  }
  out += fmt::format("| Average | {} | {} |\n\n", c.overall.str(), pct(c.overall_percent));
  out += c.mode == AverageMode::success_weighted
             ? "Averages are success-weighted: total successes over total runs.\n"
             : "Averages are task means: the mean of each task's completion rate.\n";

  out += "\n## Role metrics\n\n| Category | Role | Run | Act | Iter | Tkn |\n|---|---|---|---|---|---|\n";
  bool estimated = false;
  for (const auto& r : t.roles.rows) {
    estimated = estimated || !r.tokens_exact;
    out += fmt::format("| {} | {} | {} | {:.1f} | {:.1f} | {}{} |\n", cat_label(r.category),
                       to_string(r.role), r.run_cell.str(), r.mean_actions, r.mean_iterations,
                       format_tokens(r.mean_tokens), r.tokens_exact ? "" : "*");
  }
  if (estimated) out += "\n* token count estimated from text length, not reported by the backend\n";
  return out;
}

std::string render_csv(const ReportTables& t) {
  const auto& c = t.completion;
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& task : c.tasks) {
    out += csv_row({"task", task.category, task.task_id, std::to_string(task.cell.successes),
                    std::to_string(task.cell.total), pct(task.cell.percent()), "", "", ""});
  }
  for (const auto& row : c.categories) {
    out += csv_row({"category", row.category, "", std::to_string(row.cell.successes),
                    std::to_string(row.cell.total), pct(row.percent), "", "", ""});
  }
  out += csv_row({"overall", "", "", std::to_string(c.overall.successes),
                  std::to_string(c.overall.total), pct(c.overall_percent), "", "", ""});
  for (const auto& r : t.roles.rows) {
    out += csv_row({"role", r.category, std::string(to_string(r.role)),
                    std::to_string(r.run_cell.successes), std::to_string(r.run_cell.total),
                    pct(r.run_cell.percent()), fmt::format("{}", r.mean_actions),
                    fmt::format("{}", r.mean_iterations), fmt::format("{}", r.mean_tokens)});
  }
  return out;
}

}  // namespace

std::string render_report(const ReportTables& tables, ReportFormat format) {
  if (tables.completion.tasks.empty()) {
    throw Error(ErrorCode::invalid_argument, "nothing to report");
  }
  return format == ReportFormat::csv ? render_csv(tables) : render_markdown(tables);
}

std::string render_report(const ReportTables& tables, std::string_view format) {
  const auto f = parse_report_format(format);
  if (!f) throw Error(ErrorCode::invalid_argument, fmt::format("unknown report format \"{}\"", format));
  return render_report(tables, *f);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace medpipe
