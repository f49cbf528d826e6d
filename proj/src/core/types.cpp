#include "medsim/core/types.hpp"

#include <charconv>

namespace medsim {

std::string_view to_string(AgentClass cls) {
  switch (cls) {
    case AgentClass::manufacturer: return "manufacturer";
    case AgentClass::distributor: return "distributor";
    case AgentClass::hospital: return "hospital";
  }
  return "unknown";
}

std::optional<AgentClass> parse_agent_class(std::string_view text) {
  if (text == "manufacturer") return AgentClass::manufacturer;
  if (text == "distributor") return AgentClass::distributor;
  if (text == "hospital") return AgentClass::hospital;
  return std::nullopt;
}

std::string AgentId::name() const {
  std::string out(to_string(cls));
  out += '_';
  out += std::to_string(index);
  return out;
}

std::optional<AgentId> parse_agent_name(std::string_view name) {
  const auto sep = name.rfind('_');
  if (sep == std::string_view::npos) return std::nullopt;
  auto cls = parse_agent_class(name.substr(0, sep));
  if (!cls) return std::nullopt;
  const auto digits = name.substr(sep + 1);
  if (digits.empty() || (digits.size() > 1 && digits.front() == '0')) return std::nullopt;
  int index = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return AgentId{*cls, index, -1};
}

}  // namespace medsim
