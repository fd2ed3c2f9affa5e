#include "medpipe/transcript.hpp"

#include <fmt/format.h>

#include "medpipe/error.hpp"

namespace medpipe {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::prompt: return "prompt";
    case EventKind::completion: return "completion";
    case EventKind::tool_call: return "tool_call";
    case EventKind::tool_result: return "tool_result";
    case EventKind::verdict: return "verdict";
  }
  return "prompt";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::prompt, EventKind::completion, EventKind::tool_call,
                 EventKind::tool_result, EventKind::verdict}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

nlohmann::ordered_json TranscriptEvent::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["stage"] = stage;
  j["seq"] = seq;
  j["kind"] = std::string(to_string(kind));
  j["payload"] = payload;
  j["tokens"] = tokens;
  return j;
}

TranscriptEvent TranscriptEvent::from_json(const nlohmann::json& j) {
  TranscriptEvent e;
  e.run_id = j.at("run_id").get<std::string>();
  e.stage = j.at("stage").get<std::string>();
  e.seq = j.at("seq").get<long long>();
  const auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::parse, "unknown transcript event kind");
  e.kind = *kind;
  e.payload = nlohmann::ordered_json::parse(j.at("payload").dump());
  e.tokens = j.value("tokens", 0LL);
  return e;
}

Transcript::Transcript(std::string run_id, std::optional<std::filesystem::path> file)
    : run_id_(std::move(run_id)) {
  if (file) {
    out_.emplace(*file, std::ios::binary | std::ios::app);
    if (!*out_) throw Error(ErrorCode::io, fmt::format("cannot open transcript {}", file->string()));
  }
}

const TranscriptEvent& Transcript::append(std::string_view stage, EventKind kind,
                                          nlohmann::ordered_json payload, long long tokens) {
  events_.push_back({run_id_, std::string(stage), next_seq(), kind, std::move(payload), tokens});
  if (out_) {
    *out_ << events_.back().to_json().dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
            << '\n';
    out_->flush();
  }
  return events_.back();
}

std::vector<TranscriptEvent> load_transcript(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot open {}", file.string()));
  std::vector<TranscriptEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(TranscriptEvent::from_json(nlohmann::json::parse(line)));
  }
  return events;
}

}  // namespace medpipe
