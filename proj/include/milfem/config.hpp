#pragma once

#include <string>

#include "milfem/harness.hpp"

// Declarative configuration: a JSON file with "problem" and "experiment"
// sections mirroring ProblemSpec and ExperimentPlan (schema in the README).
namespace milfem {

// Throws ConfigError on unreadable files, unknown keys' values or violated
// invariants.
ExperimentPlan load_plan(const std::string& file);

// Parse from a JSON string (file contents).
ExperimentPlan parse_plan(const std::string& json_text);

// The built-in default plan (default problem, temporal study).
ExperimentPlan default_plan();

} // namespace milfem
