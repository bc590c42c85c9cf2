#pragma once

#include <vector>

#include "run_config.hpp"

namespace spmseg::cli {

const std::vector<CommandDef>& command_defs();

// Runs one resolved command, writing outputs and the manifest into the
// configured output directory.
void run_command(const std::string& name, const json& cfg);

}  // namespace spmseg::cli
