#pragma once

#include <vector>

#include "medsim/agents/tools.hpp"
#include "medsim/coordination/messages.hpp"
#include "medsim/core/types.hpp"

namespace medsim::agents {

/// Local view of a hospital a^(h)_k at day t.
struct HospitalObservation {
  Day day = 0;
  AgentId agent;
  PerDrug<Units> inventory;
  PerDrug<Units> pipeline;
  PerDrug<Units> buffer_target;
  PerDrug<Units> backlog;
  PerDrug<double> criticality_weight;
  PerDrug<double> forecast;  // noise-free projected demand for today
};

struct HospitalDecision {
  PerDrug<Units> orders;
  PerDrug<double> criticality;
  PerDrug<double> forecast;
};

/// Local view of a distributor a^(d)_j, including this round's hospital orders.
struct DistributorObservation {
  Day day = 0;
  AgentId agent;
  PerDrug<Units> inventory;
  PerDrug<Units> pipeline;
  bool disrupted = false;
  std::vector<coordination::OrderMsg> orders;
};

struct DistributorDecision {
  /// shipments[k][drug], parallel to DistributorObservation::orders.
  std::vector<PerDrug<Units>> shipments;
};

/// Local view of a manufacturer a^(m)_i. Both raw regional case counts and
/// the distributor aggregates are exposed.
struct ManufacturerObservation {
  Day day = 0;
  AgentId agent;
  PerDrug<Units> available;   // Q_i^t, today's production included
  PerDrug<Units> production;  // units produced today
  bool disrupted = false;
  std::vector<double> severity;        // S_r^t = I_r / N_r, per region
  std::vector<double> regional_cases;  // I_r(t), per region
  std::vector<coordination::AggregateDemandMsg> demand;  // one per region, region order
  double alpha = 0.0;
  double epsilon = 0.0;
};

struct ManufacturerDecision {
  /// allocation[region][drug]
  std::vector<PerDrug<Units>> allocation;
  FairnessScore fairness;
};

HospitalDecision hospital_decide(const HospitalObservation& obs);
DistributorDecision distributor_decide(const DistributorObservation& obs);
ManufacturerDecision manufacturer_decide(const ManufacturerObservation& obs);

/// Decision function f_a: observation (with incoming messages) → action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual HospitalDecision decide(const HospitalObservation& obs) = 0;
  virtual DistributorDecision decide(const DistributorObservation& obs) = 0;
  virtual ManufacturerDecision decide(const ManufacturerObservation& obs) = 0;
};

/// The deterministic tool-driven policy.
class BuiltinPolicy final : public Policy {
 public:
  HospitalDecision decide(const HospitalObservation& obs) override { return hospital_decide(obs); }
  DistributorDecision decide(const DistributorObservation& obs) override {
    return distributor_decide(obs);
  }
  ManufacturerDecision decide(const ManufacturerObservation& obs) override {
    return manufacturer_decide(obs);
  }
};

}  // namespace medsim::agents
