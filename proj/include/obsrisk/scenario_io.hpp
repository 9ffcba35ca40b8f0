#ifndef OBSRISK_SCENARIO_IO_HPP
#define OBSRISK_SCENARIO_IO_HPP

#include <string>
#include <string_view>
#include <vector>

#include "obsrisk/scenario.hpp"

namespace obsrisk {

/// Parses and validates a scenario document (UTF-8 JSON). Top-level keys
/// must be exactly {name, x_law, u_law, mu0, mu1, pi0} plus an optional
/// `metadata` object of string values.
ScenarioModel parse_scenario(std::string_view json_text);

/// Built-in name ("toy", "table1-witness", "expertise-witness") or a path to
/// a scenario file.
ScenarioModel load_scenario(const std::string& name_or_path);

/// Canonical document: fixed key order, canonical expression text, shortest
/// round-trip numbers, two-space indent, trailing newline.
std::string dump_scenario(const ScenarioModel& model);

std::vector<std::string> builtin_scenario_names();
bool is_builtin_scenario(std::string_view name);
/// Document text of a built-in scenario.
std::string builtin_scenario_text(std::string_view name);

}  // namespace obsrisk

#endif  // OBSRISK_SCENARIO_IO_HPP
