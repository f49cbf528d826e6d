#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "medsim/agents/agents.hpp"
#include "medsim/coordination/messages.hpp"
#include "medsim/coordination/topology.hpp"
#include "medsim/scenario/timeline.hpp"

namespace medsim::coordination {

/// Goods on their way from `from` to `to`. Reserve deployments carry
/// from_reserve = true and no meaningful `from`.
struct Shipment {
  AgentId from;
  AgentId to;
  int drug = 0;
  Units quantity = 0;
  Day ship_day = 0;
  Day arrival_day = 0;
  bool from_reserve = false;

  friend bool operator==(const Shipment&, const Shipment&) = default;
};

/// Physical state between rounds. Agent vectors are indexed by AgentId::index.
struct WorldState {
  Day day = 0;  // next day to run
  PerDrug<Units> manufacturer_stock;
  std::vector<PerDrug<Units>> distributor_stock;
  std::vector<PerDrug<Units>> hospital_stock;
  std::vector<PerDrug<Units>> backlog;
  std::vector<Shipment> in_transit;

  // Cumulative flows for the conservation identity, per drug.
  PerDrug<Units> initial_stock;
  PerDrug<Units> produced;
  PerDrug<Units> deployed;
  PerDrug<Units> consumed;

  /// Undelivered units bound for `agent` (its pipeline P).
  Units pipeline(const AgentId& agent, int drug) const;
  PerDrug<Units> pipeline(const AgentId& agent) const;
  PerDrug<Units>& stock_of(const AgentId& agent);
  const PerDrug<Units>& stock_of(const AgentId& agent) const;

  /// On-hand plus in-transit units of `drug` across all agents.
  Units units_in_system(int drug) const;
};

/// Hospitals start at their buffer targets; distributors and the manufacturer
/// at their configured initial stock.
WorldState initial_world(const scenario::ScenarioConfig& config, const Topology& topology);

/// Throws InvariantViolation on negative stock or when
/// initial + produced + deployed != consumed + on-hand + in-transit.
void check_world(const WorldState& state);

struct PolicyTable {
  agents::Policy* hospital = nullptr;
  agents::Policy* distributor = nullptr;
  agents::Policy* manufacturer = nullptr;
};

/// A policy failure (exception or malformed decision) aborts the round.
class RoundAborted : public InvariantViolation {
 public:
  using InvariantViolation::InvariantViolation;
};

struct RoundOutcome {
  Day day = 0;
  AgentId manufacturer{AgentClass::manufacturer, 0, -1};
  std::vector<OrderMsg> orders;
  std::vector<AggregateDemandMsg> aggregates;
  std::vector<AllocationMsg> allocations;
  std::vector<FulfillmentMsg> fulfillments;

  std::vector<agents::HospitalDecision> hospital_decisions;        // by hospital index
  std::vector<agents::DistributorDecision> distributor_decisions;  // by distributor index
  agents::ManufacturerDecision manufacturer_decision;

  std::vector<Shipment> delivered;  // arrivals processed at the start of the day
  std::vector<Shipment> scheduled;  // shipments sent today

  // Per hospital, per drug.
  std::vector<PerDrug<Units>> opening_inventory;  // after delivery, before consumption
  std::vector<PerDrug<Units>> demand;             // new patient demand today
  std::vector<PerDrug<Units>> served;             // demand plus backlog actually served
  std::vector<PerDrug<Units>> unmet;              // carried forward as backlog

  PerDrug<Units> production;
  PerDrug<Units> available;  // Q at allocation time, production included
  std::vector<double> severity;
  std::vector<AgentId> disrupted;  // agents whose flag was raised today

  std::map<std::string, int> decide_calls;
};

/// One single-pass round: deliver, consume, order, aggregate, produce and
/// allocate, sub-allocate, ship. `state.day` is the day run.
RoundOutcome run_round(const scenario::Timeline& timeline, const Topology& topology,
                       const WorldState& state, const PolicyTable& policies);

/// Applies the outcome's deltas to `state` and checks every invariant.
WorldState apply_outcome(const WorldState& state, const RoundOutcome& outcome);

/// Ships reserve units to the given distributors, arriving after the lead time.
/// `quantity[distributor index][drug]`. Returns the shipments created.
std::vector<Shipment> apply_deployments(WorldState& state, Day day, int lead_time,
                                        const std::vector<AgentId>& distributors,
                                        const std::vector<PerDrug<Units>>& quantity);

/// Replays recorded hospital and distributor decisions. Used to re-run a round
/// whose manufacturer decision was rejected.
class RecordedPolicy final : public agents::Policy {
 public:
  explicit RecordedPolicy(const RoundOutcome& outcome) : outcome_(outcome) {}
  agents::HospitalDecision decide(const agents::HospitalObservation& obs) override;
  agents::DistributorDecision decide(const agents::DistributorObservation& obs) override;
  agents::ManufacturerDecision decide(const agents::ManufacturerObservation& obs) override;

 private:
  const RoundOutcome& outcome_;
};

/// Round-log rows `day,msg_type,src,dst,drug,quantity` for the four message sets.
void write_round_rows(const RoundOutcome& outcome, std::ostream& out);
inline constexpr const char* kRoundLogHeader = "day,msg_type,src,dst,drug,quantity";

}  // namespace medsim::coordination
