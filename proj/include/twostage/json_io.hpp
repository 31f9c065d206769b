#pragma once

#include <json.hpp>

#include "twostage/coupling.hpp"
#include "twostage/diagnostics.hpp"
#include "twostage/montecarlo.hpp"

namespace twostage {

// Schemas are documented in docs/schemas.md.

SimPopConfig sim_pop_config_from_json(const nlohmann::json& j);

// Single-stage design over `sizes.size()` units; "probs" may be an array or
// the string "proportional_to_size".
Design design_from_json(const nlohmann::json& j, const std::vector<double>& sizes);

// Second-stage rule applied to one PSU: srswor (n or "all") or uniform poisson.
Design second_stage_design_from_json(const nlohmann::json& j, int psu_size);

TwoStageDesign two_stage_design_from_json(const nlohmann::json& j, const Population& pop);

nlohmann::json sample_to_json(const TwoStageSample& s, const nlohmann::json& design_echo);
TwoStageSample sample_from_json(const nlohmann::json& j, nlohmann::json* design_echo = nullptr);

// Scenario file: single cell or grid; the master seed fills the population
// seed and the per-cell seeds.
McGrid grid_from_json(const nlohmann::json& j, std::uint64_t master_seed);

nlohmann::json report_to_json(const McReport& r);
nlohmann::json assumption_report_to_json(const AssumptionReport& r);
nlohmann::json decomposition_to_json(const VarianceDecomposition& d);

}  // namespace twostage
