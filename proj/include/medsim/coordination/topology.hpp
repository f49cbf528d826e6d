#pragma once

#include <vector>

#include "medsim/core/types.hpp"
#include "medsim/scenario/config.hpp"

namespace medsim::coordination {

struct Edge {
  AgentId from;  // downstream agent (the one that orders)
  AgentId to;    // its supplier
};

/// The supply-chain DAG. Orders travel along edges, goods against them.
struct Topology {
  std::vector<AgentId> nodes;
  std::vector<Edge> edges;
  int lead_time = 1;

  std::vector<AgentId> of_class(AgentClass cls) const;
  /// The unique supplier of a hospital or distributor.
  AgentId supplier_of(const AgentId& agent) const;
  /// Agents whose supplier is `agent`, in node order.
  std::vector<AgentId> customers_of(const AgentId& agent) const;
  /// The distributor serving `region`.
  AgentId distributor_for_region(int region) const;
};

/// One manufacturer, and one distributor and one hospital per region.
Topology build_topology(const scenario::ScenarioConfig& config);

/// Throws ConfigError on a cycle, duplicate nodes, dangling edges, or an agent
/// without exactly one supplier of the next tier.
void validate_topology(const Topology& topology);

}  // namespace medsim::coordination
