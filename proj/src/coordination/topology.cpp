#include "medsim/coordination/topology.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace medsim::coordination {

namespace {

int tier(AgentClass cls) {
  switch (cls) {
    case AgentClass::hospital: return 0;
    case AgentClass::distributor: return 1;
    case AgentClass::manufacturer: return 2;
  }
  return -1;
}

std::size_t node_index(const Topology& t, const AgentId& a) {
  for (std::size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i] == a) return i;
  throw ConfigError("topology: unknown agent " + a.name());
}

}  // namespace

std::vector<AgentId> Topology::of_class(AgentClass cls) const {
  std::vector<AgentId> out;
  for (const auto& n : nodes)
    if (n.cls == cls) out.push_back(n);
  return out;
}

AgentId Topology::supplier_of(const AgentId& agent) const {
  for (const auto& e : edges)
    if (e.from == agent) return e.to;
  throw ConfigError("topology: " + agent.name() + " has no supplier");
}

std::vector<AgentId> Topology::customers_of(const AgentId& agent) const {
  std::vector<AgentId> out;
  for (const auto& n : nodes)
    for (const auto& e : edges)
      if (e.from == n && e.to == agent) out.push_back(n);
  return out;
}

AgentId Topology::distributor_for_region(int region) const {
  for (const auto& n : nodes)
    if (n.cls == AgentClass::distributor && n.region == region) return n;
  throw ConfigError("topology: no distributor for region " + std::to_string(region));
}

Topology build_topology(const scenario::ScenarioConfig& config) {
  if (config.num_regions < 1) throw ConfigError("topology: num_regions must be >= 1");
  if (static_cast<int>(config.buffer_targets.size()) != config.num_regions)
    throw ConfigError("topology: one hospital per region requires one buffer row per region");

  Topology t;
  t.lead_time = config.lead_time_days;
  const AgentId m{AgentClass::manufacturer, 0, -1};
  t.nodes.push_back(m);
  for (int r = 0; r < config.num_regions; ++r) t.nodes.push_back({AgentClass::distributor, r, r});
  for (int r = 0; r < config.num_regions; ++r) t.nodes.push_back({AgentClass::hospital, r, r});
  for (int r = 0; r < config.num_regions; ++r) {
    t.edges.push_back({{AgentClass::hospital, r, r}, {AgentClass::distributor, r, r}});
    t.edges.push_back({{AgentClass::distributor, r, r}, m});
  }
  validate_topology(t);
  return t;
}

void validate_topology(const Topology& t) {
  if (t.lead_time < 0) throw ConfigError("topology: lead_time must be >= 0");
  std::set<std::string> names;
  for (const auto& n : t.nodes)
    if (!names.insert(n.name()).second) throw ConfigError("topology: duplicate node " + n.name());

  // Kahn's algorithm; anything left over sits on a cycle.
  const std::size_t n = t.nodes.size();
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<int> indegree(n, 0);
  for (const auto& e : t.edges) {
    const auto a = node_index(t, e.from);
    const auto b = node_index(t, e.to);
    out[a].push_back(b);
    ++indegree[b];
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto i = ready.back();
    ready.pop_back();
    ++seen;
    for (auto j : out[i])
      if (--indegree[j] == 0) ready.push_back(j);
  }
  if (seen != n) throw ConfigError("topology: graph has a cycle");

  std::map<std::string, int> suppliers;
  for (const auto& e : t.edges) {
    if (tier(e.to.cls) != tier(e.from.cls) + 1)
      throw ConfigError("topology: edge " + e.from.name() + " -> " + e.to.name() +
                        " must point to the next tier up");
    ++suppliers[e.from.name()];
  }
  for (const auto& node : t.nodes) {
    if (node.cls == AgentClass::manufacturer) continue;
    if (suppliers[node.name()] != 1)
      throw ConfigError("topology: " + node.name() + " must have exactly one supplier");
  }
  if (t.of_class(AgentClass::manufacturer).empty())
    throw ConfigError("topology: no manufacturer");
}

}  // namespace medsim::coordination
