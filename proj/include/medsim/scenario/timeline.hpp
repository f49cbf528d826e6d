#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "medsim/core/rng.hpp"
#include "medsim/core/types.hpp"
#include "medsim/scenario/config.hpp"
#include "medsim/scenario/sir.hpp"

namespace medsim::scenario {

struct DemandSample {
  int region = 0;
  int drug = 0;
  Units expected = 0;        // realized demand, integer units >= 0
  double noise_sigma = 0.0;  // standard deviation used for this draw
};

/// Draws one demand value: max(0, round(infected·criticality + ε)),
/// ε ~ Normal(0, noise_frac·infected·criticality).
DemandSample sample_demand(double infected, double criticality, double noise_frac,
                           RandomStream& rng);

/// True with probability p; consumes exactly one uniform draw. Throws
/// ConfigError for p outside [0, 1].
bool sample_disruption(double p, RandomStream& rng);

/// The exogenous world for one run: epidemic curves, realized demand and the
/// disruption schedule. Immutable once generated.
class Timeline {
 public:
  const ScenarioConfig& config() const { return config_; }
  int num_regions() const { return config_.num_regions; }
  int num_drugs() const { return config_.num_drugs; }
  int horizon() const { return config_.horizon_days; }

  /// SIR state of `region` at the start of `day`.
  const SIRState& sir(int region, Day day) const;
  const DemandSample& demand(Day day, int region, int drug) const;

  /// Noise-free demand I_r(day) × criticality(drug).
  double projected_demand(int region, int drug, Day day) const;

  /// Infected fraction I_r(day) / N_r.
  double severity(int region, Day day) const;

  /// Disruption flag for `agent` on `day`, drawn from the agent's own sub-stream.
  bool disrupted(const std::string& agent, Day day) const;

  std::size_t sir_state_count() const;
  std::size_t demand_sample_count() const { return demand_.size(); }

  /// `day,region,s,i,r` rows.
  void write_sir_csv(std::ostream& out) const;
  /// `day,region,drug,demand` rows.
  void write_demand_csv(std::ostream& out) const;

 private:
  friend Timeline generate_scenario(const ScenarioConfig& config);

  std::size_t demand_index(Day day, int region, int drug) const;

  ScenarioConfig config_;
  std::vector<std::vector<SIRState>> sir_;  // [region][day]
  std::vector<DemandSample> demand_;        // [day][region][drug]
};

/// Validates the config and materializes the timeline. The same config and
/// seed always produce the same timeline.
Timeline generate_scenario(const ScenarioConfig& config);

/// Shortest round-trip decimal form of a double, for bit-stable CSV output.
std::string format_double(double v);

}  // namespace medsim::scenario
