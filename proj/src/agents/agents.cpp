#include "medsim/agents/agents.hpp"

#include <algorithm>
#include <numeric>

#include "medsim/core/apportion.hpp"

namespace medsim::agents {

HospitalDecision hospital_decide(const HospitalObservation& obs) {
  const std::size_t drugs = obs.inventory.size();
  HospitalDecision out;
  out.orders.resize(drugs);
  out.criticality.resize(drugs);
  out.forecast = obs.forecast;
  out.forecast.resize(drugs, 0.0);
  for (std::size_t d = 0; d < drugs; ++d) {
    // Backlog widens the gap so unmet demand is re-requested, never dropped.
    out.orders[d] = tool_order_estimator(obs.buffer_target[d] + obs.backlog[d], obs.inventory[d],
                                         obs.pipeline[d]);
    out.criticality[d] = tool_criticality(obs.buffer_target[d], obs.inventory[d], obs.pipeline[d],
                                          obs.criticality_weight[d])
                             .value;
  }
  return out;
}

DistributorDecision distributor_decide(const DistributorObservation& obs) {
  const std::size_t drugs = obs.inventory.size();
  const std::size_t hospitals = obs.orders.size();
  DistributorDecision out;
  out.shipments.assign(hospitals, PerDrug<Units>(drugs, 0));

  for (std::size_t d = 0; d < drugs; ++d) {
    std::vector<Units> requested(hospitals);
    std::vector<double> weight(hospitals);
    Units total = 0;
    for (std::size_t k = 0; k < hospitals; ++k) {
      requested[k] = std::max<Units>(0, obs.orders[k].quantity[d]);
      const double crit = d < obs.orders[k].criticality.size() ? obs.orders[k].criticality[d] : 0.0;
      weight[k] = static_cast<double>(requested[k]) * (1.0 + std::max(crit, 0.0));
      total += requested[k];
    }
    const Units stock = std::max<Units>(0, obs.inventory[d]);
    std::vector<Units> shipped = total <= stock ? requested
                                                : capped_proportional(weight, requested, stock);
    for (std::size_t k = 0; k < hospitals; ++k) out.shipments[k][d] = shipped[k];
  }
  return out;
}

ManufacturerDecision manufacturer_decide(const ManufacturerObservation& obs) {
  const std::size_t regions = obs.severity.size();
  const std::size_t drugs = obs.available.size();
  ManufacturerDecision out;
  out.fairness = fairness_weights(obs.severity, obs.alpha);
  out.allocation.assign(regions, PerDrug<Units>(drugs, 0));
  if (obs.disrupted) return out;

  for (std::size_t d = 0; d < drugs; ++d) {
    std::vector<Units> demand(regions, 0);
    for (std::size_t r = 0; r < regions && r < obs.demand.size(); ++r)
      demand[r] = std::max<Units>(0, obs.demand[r].total[d]);
    if (std::accumulate(demand.begin(), demand.end(), Units{0}) == 0) continue;

    const Units supply = std::max<Units>(0, obs.available[d]);
    auto alloc = tool_fairness_floor(tool_allocation_engine(obs.severity, obs.alpha, supply),
                                     obs.epsilon, supply);

    // Cap at regional demand; what the caps cut off goes back out by the same
    // weights until it is placed or every region is capped.
    Units surplus = 0;
    for (std::size_t r = 0; r < regions; ++r) {
      if (alloc[r] > demand[r]) {
        surplus += alloc[r] - demand[r];
        alloc[r] = demand[r];
      }
    }
    alloc = fill_to_caps(out.fairness.phi, demand, std::move(alloc), surplus);
    for (std::size_t r = 0; r < regions; ++r) out.allocation[r][d] = alloc[r];
  }
  return out;
}

}  // namespace medsim::agents
