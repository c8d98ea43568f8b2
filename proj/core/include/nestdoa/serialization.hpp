#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nestdoa/array_model.hpp"
#include "nestdoa/harness.hpp"
#include "nestdoa/oracles.hpp"
#include "nestdoa/solver.hpp"

namespace nestdoa {

using Json = nlohmann::json;

/// Parse a JSON file. Throws InvalidConfiguration with the path on I/O or syntax errors.
Json load_json_file(const std::filesystem::path& path);
void write_json_file(const Json& value, const std::filesystem::path& path);

/// Apply "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

/// {"m1", "m2", "spacing"} or {"positions", "spacing"}.
Json to_json(const ArrayGeometry& geometry);
ArrayGeometry geometry_from_json(const Json& j);

/// Accepts "noise_var" or "snr_db" (relative to the sum of powers).
Json to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& j);

/// Missing keys keep their defaults; unknown keys are rejected.
Json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const Json& j);

Json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const Json& j);

Json to_json(const EstimationOutput& output);
Json to_json(const OracleReport& report);

Json to_json(const ExperimentResult& result);
ExperimentResult experiment_result_from_json(const Json& j);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

}  // namespace nestdoa
