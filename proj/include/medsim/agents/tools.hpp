#pragma once

#include <span>
#include <vector>

#include "medsim/core/rng.hpp"
#include "medsim/core/types.hpp"
#include "medsim/scenario/timeline.hpp"

/// The six stateless reasoning tools. Every function here is pure: equal
/// inputs give equal outputs, and nothing is cached between calls.
namespace medsim::agents {

/// φ_r: per-region fairness weights in [0, 1] summing to 1.
struct FairnessScore {
  std::vector<double> phi;
};

/// R_k: criticality-weighted shortfall fraction in [0, c].
struct CriticalityScore {
  double value = 0.0;
};

/// Buffer-based order size max(0, B − (I + P)).
Units tool_order_estimator(Units buffer_target, Units inventory, Units pipeline);

/// Softmax weights e^{αS_r} / Σ e^{αS_r'}. Scores are shifted by their maximum
/// before exponentiation. Throws std::invalid_argument on non-finite severity
/// or negative alpha.
FairnessScore fairness_weights(std::span<const double> severity, double alpha);

/// Integer split of `available` by the softmax weights (largest remainder,
/// ties to the lowest region index). Sums to `available` exactly.
std::vector<Units> tool_allocation_engine(std::span<const double> severity, double alpha,
                                          Units available);

/// Raises every region to at least floor(ε·Q). The units needed come out of the
/// above-floor regions in proportion to their surplus, so the total stays Q.
/// Throws std::invalid_argument when ε·R > 1 or the allocation does not sum to Q.
std::vector<Units> tool_fairness_floor(std::span<const Units> allocation, double epsilon,
                                       Units available);

CriticalityScore tool_criticality(Units buffer_target, Units inventory, Units pipeline,
                                  double criticality_weight);

/// Noise-free demand I_r(t)·c for days [day, day + horizon). Throws
/// std::out_of_range when day + horizon exceeds the timeline.
std::vector<double> tool_epidemic_predictor(const scenario::Timeline& timeline, int region,
                                            int drug, Day day, int horizon);

/// Bernoulli disruption draw; same contract as scenario::sample_disruption.
bool tool_disruption_simulator(double p, RandomStream& rng);

}  // namespace medsim::agents
