#pragma once

#include <set>
#include <string_view>

#include "medpipe/agent.hpp"

namespace medpipe {

/// Built-in system prompt for a role. Placeholders:
///   task_manager      {description_path}
///   data_engineer     {selector_content} {save_path} {examples_path}
///   module_architect  {dataindex_path} {template_path} {processor_msg} {description}
///   model_trainer     {processor_msg} {dataloader_msg} {work_path} {train_script_path}
std::string_view default_prompt_template(AgentRole role);

std::set<ToolName> default_tool_subset(AgentRole role);

/// Regex picking out the stage's validation runs among run_script commands.
std::string_view default_validation_pattern(AgentRole role);

AgentSpec default_agent_spec(AgentRole role, int max_actions, int max_debug_iters = 5);

}  // namespace medpipe
