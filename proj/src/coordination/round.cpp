#include "medsim/coordination/round.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace medsim::coordination {

using agents::DistributorDecision;
using agents::HospitalDecision;
using agents::ManufacturerDecision;

namespace {

std::size_t idx(const AgentId& a) { return static_cast<std::size_t>(a.index); }

void require(bool ok, Day day, const AgentId& agent, const std::string& what) {
  if (!ok)
    throw RoundAborted("day " + std::to_string(day) + ", " + agent.name() + ": " + what);
}

template <typename Obs>
auto call_policy(agents::Policy* policy, const Obs& obs, RoundOutcome& out) {
  require(policy != nullptr, obs.day, obs.agent, "no policy bound");
  ++out.decide_calls[obs.agent.name()];
  try {
    return policy->decide(obs);
  } catch (const RoundAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw RoundAborted("day " + std::to_string(obs.day) + ", " + obs.agent.name() +
                       ": policy failed: " + e.what());
  }
}

void deliver(WorldState& w, const Shipment& s) { w.stock_of(s.to)[static_cast<std::size_t>(s.drug)] += s.quantity; }

}  // namespace

Units WorldState::pipeline(const AgentId& agent, int drug) const {
  Units p = 0;
  for (const auto& s : in_transit)
    if (s.to == agent && s.drug == drug) p += s.quantity;
  return p;
}

PerDrug<Units> WorldState::pipeline(const AgentId& agent) const {
  PerDrug<Units> out(manufacturer_stock.size(), 0);
  for (const auto& s : in_transit)
    if (s.to == agent) out[static_cast<std::size_t>(s.drug)] += s.quantity;
  return out;
}

PerDrug<Units>& WorldState::stock_of(const AgentId& agent) {
  return const_cast<PerDrug<Units>&>(std::as_const(*this).stock_of(agent));
}

const PerDrug<Units>& WorldState::stock_of(const AgentId& agent) const {
  switch (agent.cls) {
    case AgentClass::manufacturer: return manufacturer_stock;
    case AgentClass::distributor: return distributor_stock.at(idx(agent));
    case AgentClass::hospital: return hospital_stock.at(idx(agent));
  }
  throw std::logic_error("stock_of: bad agent class");
}

Units WorldState::units_in_system(int drug) const {
  const auto d = static_cast<std::size_t>(drug);
  Units sum = manufacturer_stock[d];
  for (const auto& row : distributor_stock) sum += row[d];
  for (const auto& row : hospital_stock) sum += row[d];
  for (const auto& s : in_transit)
    if (s.drug == drug) sum += s.quantity;
  return sum;
}

WorldState initial_world(const scenario::ScenarioConfig& config, const Topology& topology) {
  const auto drugs = static_cast<std::size_t>(config.num_drugs);
  WorldState w;
  w.manufacturer_stock = config.manufacturer_initial_stock;
  for (const auto& d : topology.of_class(AgentClass::distributor)) {
    if (w.distributor_stock.size() <= idx(d)) w.distributor_stock.resize(idx(d) + 1);
    w.distributor_stock[idx(d)] = config.distributor_initial_stock.at(static_cast<std::size_t>(d.region));
  }
  for (const auto& h : topology.of_class(AgentClass::hospital)) {
    if (w.hospital_stock.size() <= idx(h)) w.hospital_stock.resize(idx(h) + 1);
    w.hospital_stock[idx(h)] = config.buffer_targets.at(idx(h));
  }
  w.backlog.assign(w.hospital_stock.size(), PerDrug<Units>(drugs, 0));
  w.produced.assign(drugs, 0);
  w.deployed.assign(drugs, 0);
  w.consumed.assign(drugs, 0);
  w.initial_stock.assign(drugs, 0);
  for (std::size_t d = 0; d < drugs; ++d) w.initial_stock[d] = w.units_in_system(static_cast<int>(d));
  check_world(w);
  return w;
}

void check_world(const WorldState& w) {
  auto fail = [&](const std::string& what) {
    throw InvariantViolation("day " + std::to_string(w.day) + ": " + what);
  };
  auto nonneg = [&](const PerDrug<Units>& v, const std::string& who) {
    for (Units x : v)
      if (x < 0) fail("negative stock at " + who);
  };
  nonneg(w.manufacturer_stock, "manufacturer");
  for (std::size_t j = 0; j < w.distributor_stock.size(); ++j)
    nonneg(w.distributor_stock[j], "distributor_" + std::to_string(j));
  for (std::size_t k = 0; k < w.hospital_stock.size(); ++k) {
    nonneg(w.hospital_stock[k], "hospital_" + std::to_string(k));
    nonneg(w.backlog[k], "backlog of hospital_" + std::to_string(k));
  }
  for (const auto& s : w.in_transit)
    if (s.quantity < 0) fail("negative in-transit quantity");
  for (std::size_t d = 0; d < w.manufacturer_stock.size(); ++d) {
    const Units in = w.initial_stock[d] + w.produced[d] + w.deployed[d];
    const Units out = w.consumed[d] + w.units_in_system(static_cast<int>(d));
    if (in != out)
      fail("goods conservation broken for drug " + std::to_string(d) + ": " +
           std::to_string(in) + " entered, " + std::to_string(out) + " accounted");
  }
}

RoundOutcome run_round(const scenario::Timeline& timeline, const Topology& topology,
                       const WorldState& state, const PolicyTable& policies) {
  const Day t = state.day;
  if (t < 0 || t >= timeline.horizon())
    throw std::out_of_range("run_round: day " + std::to_string(t) + " outside the horizon");
  const auto& cfg = timeline.config();
  const auto drugs = static_cast<std::size_t>(timeline.num_drugs());
  const int lead = topology.lead_time;

  WorldState w = state;
  RoundOutcome out;
  out.day = t;

  // Deliver.
  std::vector<Shipment> pending;
  for (const auto& s : w.in_transit) {
    if (s.arrival_day <= t) {
      deliver(w, s);
      out.delivered.push_back(s);
    } else {
      pending.push_back(s);
    }
  }
  w.in_transit = std::move(pending);

  // Consume.
  const auto hospitals = topology.of_class(AgentClass::hospital);
  const std::size_t nh = w.hospital_stock.size();
  out.opening_inventory = w.hospital_stock;
  out.demand.assign(nh, PerDrug<Units>(drugs, 0));
  out.served.assign(nh, PerDrug<Units>(drugs, 0));
  out.unmet.assign(nh, PerDrug<Units>(drugs, 0));
  for (const auto& h : hospitals) {
    const auto k = idx(h);
    for (std::size_t d = 0; d < drugs; ++d) {
      const Units demand = timeline.demand(t, h.region, static_cast<int>(d)).expected;
      const Units need = demand + w.backlog[k][d];
      const Units served = std::min(w.hospital_stock[k][d], need);
      w.hospital_stock[k][d] -= served;
      w.backlog[k][d] = need - served;
      out.demand[k][d] = demand;
      out.served[k][d] = served;
      out.unmet[k][d] = need - served;
    }
  }

  // Hospitals order.
  out.hospital_decisions.resize(nh);
  for (const auto& h : hospitals) {
    const auto k = idx(h);
    agents::HospitalObservation obs;
    obs.day = t;
    obs.agent = h;
    obs.inventory = w.hospital_stock[k];
    obs.pipeline = w.pipeline(h);
    obs.buffer_target = cfg.buffer_targets[k];
    obs.backlog = w.backlog[k];
    obs.criticality_weight = cfg.drug_criticality;
    for (std::size_t d = 0; d < drugs; ++d)
      obs.forecast.push_back(timeline.projected_demand(h.region, static_cast<int>(d), t));
    auto decision = call_policy(policies.hospital, obs, out);
    require(decision.orders.size() == drugs, t, h, "order vector has the wrong length");
    for (Units q : decision.orders) require(q >= 0, t, h, "negative order");
    decision.criticality.resize(drugs, 0.0);
    decision.forecast.resize(drugs, 0.0);
    out.orders.push_back({h, decision.orders, decision.forecast, decision.criticality});
    out.hospital_decisions[k] = std::move(decision);
  }

  // Distributors aggregate and forward.
  const auto distributors = topology.of_class(AgentClass::distributor);
  std::vector<std::vector<OrderMsg>> inbox(w.distributor_stock.size());
  std::vector<bool> dist_disrupted(w.distributor_stock.size(), false);
  for (const auto& j : distributors) {
    for (const auto& c : topology.customers_of(j))
      for (const auto& o : out.orders)
        if (o.hospital == c) inbox[idx(j)].push_back(o);
    AggregateDemandMsg agg{j, j.region, PerDrug<Units>(drugs, 0), timeline.disrupted(j.name(), t)};
    for (const auto& o : inbox[idx(j)])
      for (std::size_t d = 0; d < drugs; ++d) agg.total[d] += o.quantity[d];
    dist_disrupted[idx(j)] = agg.disrupted;
    out.aggregates.push_back(std::move(agg));
  }

  // Manufacturer produces and allocates.
  const auto manufacturers = topology.of_class(AgentClass::manufacturer);
  if (manufacturers.size() != 1)
    throw InvariantViolation("run_round: exactly one manufacturer is supported");
  const AgentId m = manufacturers.front();
  out.manufacturer = m;
  const bool m_disrupted = timeline.disrupted(m.name(), t);
  const bool halted = m_disrupted || cfg.production_halted(t);
  out.production.assign(drugs, 0);
  for (std::size_t d = 0; d < drugs; ++d) {
    out.production[d] = halted ? 0 : cfg.manufacturer_capacity[d];
    w.manufacturer_stock[d] += out.production[d];
    w.produced[d] += out.production[d];
  }
  out.available = w.manufacturer_stock;
  const auto regions = static_cast<std::size_t>(timeline.num_regions());
  for (std::size_t r = 0; r < regions; ++r) out.severity.push_back(timeline.severity(static_cast<int>(r), t));

  agents::ManufacturerObservation mobs;
  mobs.day = t;
  mobs.agent = m;
  mobs.available = out.available;
  mobs.production = out.production;
  mobs.disrupted = m_disrupted;
  mobs.severity = out.severity;
  for (std::size_t r = 0; r < regions; ++r) mobs.regional_cases.push_back(timeline.sir(static_cast<int>(r), t).i);
  for (std::size_t r = 0; r < regions; ++r) {
    const auto j = topology.distributor_for_region(static_cast<int>(r));
    for (const auto& a : out.aggregates)
      if (a.distributor == j) mobs.demand.push_back(a);
  }
  mobs.alpha = cfg.alpha;
  mobs.epsilon = cfg.epsilon;
  auto mdec = call_policy(policies.manufacturer, mobs, out);
  require(mdec.allocation.size() == regions, t, m, "allocation has the wrong number of regions");
  for (const auto& row : mdec.allocation) {
    require(row.size() == drugs, t, m, "allocation row has the wrong length");
    for (Units x : row) require(x >= 0, t, m, "negative allocation");
  }
  if (mdec.fairness.phi.size() != regions) mdec.fairness = agents::fairness_weights(out.severity, cfg.alpha);
  for (std::size_t d = 0; d < drugs; ++d) {
    Units sum = 0;
    for (std::size_t r = 0; r < regions; ++r) sum += mdec.allocation[r][d];
    require(sum <= w.manufacturer_stock[d], t, m, "allocation exceeds available supply");
    w.manufacturer_stock[d] -= sum;
  }
  for (std::size_t r = 0; r < regions; ++r) {
    const auto j = topology.distributor_for_region(static_cast<int>(r));
    out.allocations.push_back({j, static_cast<int>(r), mdec.allocation[r], mdec.fairness.phi[r]});
    for (std::size_t d = 0; d < drugs; ++d)
      if (mdec.allocation[r][d] > 0)
        out.scheduled.push_back({m, j, static_cast<int>(d), mdec.allocation[r][d], t, t + lead, false});
  }
  out.manufacturer_decision = std::move(mdec);

  // Distributors sub-allocate from stock on hand.
  out.distributor_decisions.resize(w.distributor_stock.size());
  for (const auto& j : distributors) {
    const auto ji = idx(j);
    agents::DistributorObservation obs;
    obs.day = t;
    obs.agent = j;
    obs.inventory = w.distributor_stock[ji];
    obs.pipeline = w.pipeline(j);
    obs.disrupted = dist_disrupted[ji];
    obs.orders = inbox[ji];
    auto dec = call_policy(policies.distributor, obs, out);
    require(dec.shipments.size() == obs.orders.size(), t, j, "one shipment row per order required");
    for (std::size_t d = 0; d < drugs; ++d) {
      Units sum = 0;
      for (std::size_t k = 0; k < dec.shipments.size(); ++k) {
        require(dec.shipments[k].size() == drugs, t, j, "shipment row has the wrong length");
        const Units y = dec.shipments[k][d];
        require(y >= 0, t, j, "negative shipment");
        require(y <= obs.orders[k].quantity[d], t, j, "shipment exceeds the order");
        sum += y;
      }
      require(sum <= w.distributor_stock[ji][d], t, j, "shipments exceed inventory");
      w.distributor_stock[ji][d] -= sum;
    }
    const Day arrival = t + lead + (obs.disrupted ? 1 : 0);
    for (std::size_t k = 0; k < dec.shipments.size(); ++k) {
      const auto& h = obs.orders[k].hospital;
      out.fulfillments.push_back({j, h, dec.shipments[k], obs.disrupted});
      for (std::size_t d = 0; d < drugs; ++d)
        if (dec.shipments[k][d] > 0)
          out.scheduled.push_back({j, h, static_cast<int>(d), dec.shipments[k][d], t, arrival, false});
    }
    out.distributor_decisions[ji] = std::move(dec);
  }

  if (m_disrupted) out.disrupted.push_back(m);
  for (const auto& j : distributors)
    if (dist_disrupted[idx(j)]) out.disrupted.push_back(j);
  return out;
}

WorldState apply_outcome(const WorldState& state, const RoundOutcome& o) {
  if (o.day != state.day)
    throw InvariantViolation("apply_outcome: outcome for day " + std::to_string(o.day) +
                             " applied to day " + std::to_string(state.day));
  WorldState w = state;
  const Day t = o.day;
  const std::size_t drugs = w.manufacturer_stock.size();

  std::vector<Shipment> pending;
  std::vector<Shipment> arrived;
  for (const auto& s : w.in_transit) (s.arrival_day <= t ? arrived : pending).push_back(s);
  if (arrived != o.delivered)
    throw InvariantViolation("apply_outcome: delivered shipments do not match the pipeline");
  for (const auto& s : arrived) deliver(w, s);
  w.in_transit = std::move(pending);

  for (std::size_t k = 0; k < w.hospital_stock.size(); ++k) {
    for (std::size_t d = 0; d < drugs; ++d) {
      if (o.served[k][d] + o.unmet[k][d] != o.demand[k][d] + w.backlog[k][d])
        throw InvariantViolation("apply_outcome: hospital_" + std::to_string(k) +
                                 " served + unmet != demand + backlog");
      w.hospital_stock[k][d] -= o.served[k][d];
      w.consumed[d] += o.served[k][d];
      w.backlog[k][d] = o.unmet[k][d];
    }
  }
  for (std::size_t d = 0; d < drugs; ++d) {
    w.manufacturer_stock[d] += o.production[d];
    w.produced[d] += o.production[d];
  }
  for (const auto& s : o.scheduled) {
    w.stock_of(s.from)[static_cast<std::size_t>(s.drug)] -= s.quantity;
    if (s.arrival_day <= t) deliver(w, s);
    else w.in_transit.push_back(s);
  }
  w.day = t + 1;
  check_world(w);
  return w;
}

std::vector<Shipment> apply_deployments(WorldState& state, Day day, int lead_time,
                                        const std::vector<AgentId>& distributors,
                                        const std::vector<PerDrug<Units>>& quantity) {
  std::vector<Shipment> out;
  for (std::size_t i = 0; i < distributors.size() && i < quantity.size(); ++i) {
    for (std::size_t d = 0; d < quantity[i].size(); ++d) {
      const Units q = quantity[i][d];
      if (q < 0) throw InvariantViolation("apply_deployments: negative deployment");
      if (q == 0) continue;
      Shipment s{distributors[i], distributors[i], static_cast<int>(d), q, day, day + lead_time, true};
      state.deployed[d] += q;
      if (s.arrival_day < state.day) deliver(state, s);
      else state.in_transit.push_back(s);
      out.push_back(s);
    }
  }
  check_world(state);
  return out;
}

HospitalDecision RecordedPolicy::decide(const agents::HospitalObservation& obs) {
  return outcome_.hospital_decisions.at(idx(obs.agent));
}

DistributorDecision RecordedPolicy::decide(const agents::DistributorObservation& obs) {
  return outcome_.distributor_decisions.at(idx(obs.agent));
}

ManufacturerDecision RecordedPolicy::decide(const agents::ManufacturerObservation&) {
  return outcome_.manufacturer_decision;
}

void write_round_rows(const RoundOutcome& o, std::ostream& out) {
  auto row = [&](const char* type, const std::string& src, const std::string& dst,
                 std::size_t drug, Units q) {
    out << o.day << ',' << type << ',' << src << ',' << dst << ',' << drug << ',' << q << '\n';
  };
  for (const auto& m : o.orders) {
    std::string dst;
    for (const auto& f : o.fulfillments)
      if (f.hospital == m.hospital) dst = f.distributor.name();
    for (std::size_t d = 0; d < m.quantity.size(); ++d)
      row("order", m.hospital.name(), dst, d, m.quantity[d]);
  }
  for (const auto& m : o.aggregates)
    for (std::size_t d = 0; d < m.total.size(); ++d)
      row("aggregate", m.distributor.name(), o.manufacturer.name(), d, m.total[d]);
  for (const auto& m : o.allocations)
    for (std::size_t d = 0; d < m.quantity.size(); ++d)
      row("allocation", o.manufacturer.name(), m.distributor.name(), d, m.quantity[d]);
  for (const auto& m : o.fulfillments)
    for (std::size_t d = 0; d < m.quantity.size(); ++d)
      row("fulfillment", m.distributor.name(), m.hospital.name(), d, m.quantity[d]);
}

}  // namespace medsim::coordination
