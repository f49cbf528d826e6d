#pragma once

#include <vector>

#include "medsim/core/types.hpp"

namespace medsim::coordination {

/// Hospital → distributor: m_{k→j} = (k, r_k, E_k, R_k).
struct OrderMsg {
  AgentId hospital;
  PerDrug<Units> quantity;
  PerDrug<double> forecast;
  PerDrug<double> criticality;
};

/// Distributor → manufacturer: m_{j→i} = (r, Σ r_k, d_j). `distributor` is
/// the sender; with one distributor per region it identifies the region.
struct AggregateDemandMsg {
  AgentId distributor;
  int region = 0;
  PerDrug<Units> total;
  bool disrupted = false;
};

/// Manufacturer → distributor: m_{i→j} = (r, x_{i,r}, φ_r).
struct AllocationMsg {
  AgentId distributor;
  int region = 0;
  PerDrug<Units> quantity;
  double fairness = 0.0;
};

/// Distributor → hospital: m_{j→k} = (k, y_{j,k}, d_{j,k}).
struct FulfillmentMsg {
  AgentId distributor;
  AgentId hospital;
  PerDrug<Units> quantity;
  bool delayed = false;
};

}  // namespace medsim::coordination
