#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medsim {

/// Integer stock quantity in base units.
using Units = std::int64_t;

/// Zero-based simulation day.
using Day = int;

template <typename T>
using PerDrug = std::vector<T>;

enum class AgentClass { manufacturer, distributor, hospital };

std::string_view to_string(AgentClass cls);
std::optional<AgentClass> parse_agent_class(std::string_view text);

/// Identity of a node in the supply chain. Region is -1 for manufacturers.
struct AgentId {
  AgentClass cls = AgentClass::hospital;
  int index = 0;
  int region = -1;

  /// Stable textual name, e.g. "distributor_2".
  std::string name() const;

  friend bool operator==(const AgentId&, const AgentId&) = default;
  friend auto operator<=>(const AgentId& a, const AgentId& b) {
    if (auto c = static_cast<int>(a.cls) <=> static_cast<int>(b.cls); c != 0) return c;
    return a.index <=> b.index;
  }
};

/// Parses "hospital_3" style names. Region is not encoded and comes back as -1.
std::optional<AgentId> parse_agent_name(std::string_view name);

/// Thrown for invalid user-provided configuration or inputs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a runtime invariant that the simulator guarantees is broken.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace medsim
