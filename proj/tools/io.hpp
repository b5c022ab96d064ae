#pragma once

#include <stosdp/decompose.hpp>
#include <stosdp/problem.hpp>
#include <stosdp/stability.hpp>

#include <filesystem>
#include <string>

namespace stosdp::io {

inline constexpr int kFormatVersion = 1;

/// Problem document:
///   {"format_version": 1, "dims": {"n", "m", "s"}, "c": rows, "q": rows,
///    "T": [rows...], "W": [rows...],
///    "X": {"eq": [{"G": rows, "g": v}], "ineq": [{"H": rows, "h": v}], "trace_cap": v, "compact": bool}}
/// Matrices are dense row lists. Throws ParseError naming the file and the
/// offending JSON pointer.
ProblemData parse_problem(const std::string& text, const std::string& source = "<problem>");
ProblemData read_problem(const std::filesystem::path& path);
std::string problem_to_json(const ProblemData& p);

/// {"format_version": 1, "scenarios": [{"pi": v, "z": [...]}, ...]}
ScenarioSet parse_scenarios(const std::string& text, const std::string& source = "<scenarios>");
ScenarioSet read_scenarios(const std::filesystem::path& path);
std::string scenarios_to_json(const ScenarioSet& scen);

/// {"format_version": 1, "mode": name, "magnitudes": [...], "replications": k, "seed": n}
PerturbationPlan parse_plan(const std::string& text, const std::string& source = "<plan>");
PerturbationPlan read_plan(const std::filesystem::path& path);

/// Machine-readable solve result.
std::string result_to_json(const ModelResult& r, const std::string& risk);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stosdp::io
