#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/core/types.hpp"
#include "medsim/scenario/sir.hpp"

namespace medsim::scenario {

/// Bernoulli disruption probabilities, keyed by agent name ("manufacturer_0").
/// Agents without an entry use `default_probability`.
struct DisruptionParams {
  std::map<std::string, double> per_agent_probability;
  double default_probability = 0.0;

  double probability_for(const std::string& agent) const;
};

/// Inclusive day window during which the manufacturer produces nothing.
struct ProductionOutage {
  Day first_day = 0;
  Day last_day = 0;
};

struct ScenarioConfig {
  int num_regions = 3;
  int num_drugs = 3;
  int horizon_days = 30;
  std::vector<SIRParams> sir_params;            // per region
  std::vector<double> drug_criticality;         // per drug, in [0, 1]
  DisruptionParams disruption;
  double alpha = 15.0;                          // fairness sharpness
  double epsilon = 0.05;                        // minimum-support fraction
  std::vector<std::vector<Units>> buffer_targets;  // [hospital][drug]
  int lead_time_days = 1;
  std::vector<Units> manufacturer_capacity;     // per drug, units per day
  std::vector<Units> reserve_stock;             // per drug
  double demand_noise_frac = 0.1;
  std::uint64_t seed = 42;

  std::vector<std::vector<Units>> distributor_initial_stock;  // [region][drug]
  std::vector<Units> manufacturer_initial_stock;              // per drug
  std::vector<ProductionOutage> production_outages;

  bool production_halted(Day day) const;
};

/// Default scenario: `regions` regions with one distributor and one
/// hospital each, `drugs` drugs, and β = kBaselineBeta × severity.
ScenarioConfig default_config(int regions = 3, int drugs = 3, int days = 30,
                              double severity = 0.8);

/// Re-sizes per-region / per-drug vectors after a count changed, keeping
/// explicitly set entries and filling the rest with defaults.
void conform_sizes(ScenarioConfig& config, double severity = 0.8);

/// Throws ConfigError naming the first invariant that fails.
void validate(const ScenarioConfig& config);

nlohmann::json to_json(const ScenarioConfig& config);

/// Strict parse: unknown keys are an error. Missing keys take defaults sized
/// to num_regions / num_drugs. Per-entity arrays also accept a scalar, which
/// is broadcast. The result is validated.
ScenarioConfig config_from_json(const nlohmann::json& doc);
ScenarioConfig load_config(const std::string& path);

/// Canonical text of the config (sorted keys, no whitespace).
std::string canonical_config_text(const ScenarioConfig& config);

}  // namespace medsim::scenario
