#include "medsim/agents/tools.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "medsim/core/apportion.hpp"

namespace medsim::agents {

Units tool_order_estimator(Units buffer_target, Units inventory, Units pipeline) {
  return std::max<Units>(0, buffer_target - (inventory + pipeline));
}

FairnessScore fairness_weights(std::span<const double> severity, double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw std::invalid_argument("fairness_weights: alpha must be finite and >= 0");
  FairnessScore out;
  if (severity.empty()) return out;
  for (double s : severity)
    if (!std::isfinite(s)) throw std::invalid_argument("fairness_weights: non-finite severity");

  const double top = *std::max_element(severity.begin(), severity.end());
  out.phi.resize(severity.size());
  double sum = 0.0;
  for (std::size_t r = 0; r < severity.size(); ++r) {
    out.phi[r] = std::exp(alpha * (severity[r] - top));
    sum += out.phi[r];
  }
  for (double& w : out.phi) w /= sum;
  return out;
}

std::vector<Units> tool_allocation_engine(std::span<const double> severity, double alpha,
                                          Units available) {
  if (available < 0) throw std::invalid_argument("tool_allocation_engine: negative supply");
  const auto weights = fairness_weights(severity, alpha);
  return largest_remainder(weights.phi, available);
}

std::vector<Units> tool_fairness_floor(std::span<const Units> allocation, double epsilon,
                                       Units available) {
  const std::size_t regions = allocation.size();
  if (!std::isfinite(epsilon) || epsilon < 0.0 ||
      epsilon * static_cast<double>(regions) > 1.0 + 1e-12) {
    throw std::invalid_argument("tool_fairness_floor: infeasible epsilon (epsilon * regions > 1)");
  }
  if (std::accumulate(allocation.begin(), allocation.end(), Units{0}) != available)
    throw std::invalid_argument("tool_fairness_floor: allocation must sum to the available supply");

  std::vector<Units> out(allocation.begin(), allocation.end());
  const Units floor_units = min_support_floor(epsilon, available);
  if (floor_units == 0) return out;

  Units needed = 0;
  std::vector<double> surplus(regions, 0.0);
  for (std::size_t r = 0; r < regions; ++r) {
    if (out[r] < floor_units) {
      needed += floor_units - out[r];
      out[r] = floor_units;
    } else {
      surplus[r] = static_cast<double>(out[r] - floor_units);
    }
  }
  if (needed == 0) return out;

  // Each cut is at most the region's surplus: the rounded-up share of
  // needed·s_r/Σs never exceeds the integer s_r because needed <= Σs.
  const auto cuts = largest_remainder(surplus, needed);
  for (std::size_t r = 0; r < regions; ++r) out[r] -= cuts[r];
  return out;
}

CriticalityScore tool_criticality(Units buffer_target, Units inventory, Units pipeline,
                                  double criticality_weight) {
  const Units gap = std::max<Units>(0, buffer_target - (inventory + pipeline));
  const double denom = static_cast<double>(std::max<Units>(buffer_target, 1));
  return {criticality_weight * static_cast<double>(gap) / denom};
}

std::vector<double> tool_epidemic_predictor(const scenario::Timeline& timeline, int region,
                                            int drug, Day day, int horizon) {
  if (horizon < 0 || day < 0 || day + horizon > timeline.horizon())
    throw std::out_of_range("tool_epidemic_predictor: forecast window outside the horizon");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (Day d = day; d < day + horizon; ++d) out.push_back(timeline.projected_demand(region, drug, d));
  return out;
}

bool tool_disruption_simulator(double p, RandomStream& rng) {
  return scenario::sample_disruption(p, rng);
}

}  // namespace medsim::agents
