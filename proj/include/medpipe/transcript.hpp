#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace medpipe {

enum class EventKind { prompt, completion, tool_call, tool_result, verdict };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct TranscriptEvent {
  std::string run_id;
  std::string stage;
  long long seq = 0;
  EventKind kind = EventKind::prompt;
  nlohmann::ordered_json payload;
  long long tokens = 0;

  nlohmann::ordered_json to_json() const;
  static TranscriptEvent from_json(const nlohmann::json& j);
};

/// Append-only event log of one run, mirrored to a JSONL file when a path is
/// given. Lines carry no timestamps, so scripted runs replay byte-for-byte.
class Transcript {
 public:
  explicit Transcript(std::string run_id, std::optional<std::filesystem::path> file = std::nullopt);

  const TranscriptEvent& append(std::string_view stage, EventKind kind,
                                nlohmann::ordered_json payload, long long tokens = 0);

  const std::vector<TranscriptEvent>& events() const noexcept { return events_; }
  long long next_seq() const noexcept { return static_cast<long long>(events_.size()); }
  const std::string& run_id() const noexcept { return run_id_; }

 private:
  std::string run_id_;
  std::vector<TranscriptEvent> events_;
  std::optional<std::ofstream> out_;
};

std::vector<TranscriptEvent> load_transcript(const std::filesystem::path& file);

}  // namespace medpipe
