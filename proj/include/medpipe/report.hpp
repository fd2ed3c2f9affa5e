#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medpipe/metrics.hpp"

namespace medpipe {

enum class ReportFormat { markdown, csv };

std::optional<ReportFormat> parse_report_format(std::string_view text);

struct ReportTables {
  CompletionSummary completion;
  MetricsTable roles;
};

ReportTables build_report_tables(const std::vector<RunRecord>& records,
                                 AverageMode mode = AverageMode::success_weighted);

/// Token means in the short table style: one decimal in thousands below 10k
/// ("4.3k"), whole thousands from there on ("72k").
std::string format_tokens(double tokens);

inline constexpr std::string_view kCsvHeader =
    "section,category,key,successes,total,percent,mean_actions,mean_iterations,mean_tokens";

std::string render_report(const ReportTables& tables, ReportFormat format);
/// Same, with the format given by name; unknown names are invalid_argument.
std::string render_report(const ReportTables& tables, std::string_view format);

/// Splits CSV text into records (RFC 4180 quoting).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace medpipe
