#include "medpipe/message.hpp"

#include "medpipe/error.hpp"

namespace medpipe {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view text) {
  for (auto role : {Role::system, Role::user, Role::assistant, Role::tool}) {
    if (to_string(role) == text) return role;
  }
  return std::nullopt;
}

std::string_view to_string(FinishKind kind) {
  switch (kind) {
    case FinishKind::text: return "text";
    case FinishKind::tool_calls: return "tool_calls";
    case FinishKind::length: return "length";
  }
  return "text";
}

nlohmann::json to_wire(const Message& message) {
  nlohmann::json wire = {{"role", std::string(to_string(message.role))},
                         {"content", message.content}};
  if (message.role == Role::assistant && !message.tool_calls.empty()) {
    auto calls = nlohmann::json::array();
    for (const auto& call : message.tool_calls) {
      calls.push_back({{"id", call.id},
                       {"type", "function"},
                       {"function", {{"name", call.name}, {"arguments", call.arguments}}}});
    }
    wire["tool_calls"] = std::move(calls);
  }
  if (message.role == Role::tool) wire["tool_call_id"] = message.tool_call_id;
  return wire;
}

Message message_from_wire(const nlohmann::json& wire) {
  Message message;
  const auto role = parse_role(wire.value("role", std::string("assistant")));
  if (!role) throw Error(ErrorCode::parse, "unknown message role");
  message.role = *role;
  if (const auto it = wire.find("content"); it != wire.end() && it->is_string()) {
    message.content = it->get<std::string>();
  }
  if (const auto it = wire.find("tool_calls"); it != wire.end() && it->is_array()) {
    for (const auto& call : *it) {
      RawToolCall raw;
      raw.id = call.value("id", std::string());
      const auto& fn = call.contains("function") ? call.at("function") : call;
      raw.name = fn.value("name", std::string());
      if (const auto args = fn.find("arguments"); args != fn.end()) {
        raw.arguments = args->is_string() ? args->get<std::string>() : args->dump();
      }
      message.tool_calls.push_back(std::move(raw));
    }
  }
  message.tool_call_id = wire.value("tool_call_id", std::string());
  return message;
}

}  // namespace medpipe
