#pragma once

#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "medsim/agents/agents.hpp"

namespace medsim::policy {

inline constexpr int kProtocolVersion = 1;
/// Larger quantities are a schema violation; keeps every downstream sum far
/// from overflow.
inline constexpr Units kMaxWireQuantity = 1'000'000'000'000;
inline constexpr std::size_t kMaxLineBytes = 1 << 20;

using Observation = std::variant<agents::HospitalObservation, agents::DistributorObservation,
                                 agents::ManufacturerObservation>;
using Decision = std::variant<agents::HospitalDecision, agents::DistributorDecision,
                              agents::ManufacturerDecision>;

/// Thrown by the strict parsers; `reason` is one of "malformed" or "schema".
class WireError : public std::runtime_error {
 public:
  WireError(std::string reason, const std::string& detail)
      : std::runtime_error(detail), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

/// One request line (no trailing newline).
std::string encode_request(const Observation& obs, int deadline_ms);
Observation decode_request(std::string_view line);

std::string encode_response(const AgentId& agent, Day day, const Decision& decision);

/// Strict: echo of (agent_id, day), exact key set, integer quantities in
/// [0, kMaxWireQuantity], shapes matching the observation. Hospital
/// forecast/criticality are optional and, when absent, come back empty for
/// the caller to fill. Fairness weights are never taken from the wire: the
/// ledger checks allocations against them, so the caller recomputes them.
Decision decode_response(std::string_view line, const Observation& obs);

Decision builtin_decide(const Observation& obs);
AgentId agent_of(const Observation& obs);
Day day_of(const Observation& obs);

}  // namespace medsim::policy
