#include "medsim/policy/wire.hpp"

#include <cmath>
#include <set>

namespace medsim::policy {

using nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string& what) { throw WireError("schema", what); }

json agent_json(const AgentId& a) { return {{"id", a.name()}, {"region", a.region}}; }

AgentId agent_from(const json& j) {
  auto a = parse_agent_name(j.at("id").get<std::string>());
  if (!a) throw WireError("malformed", "bad agent id");
  a->region = j.at("region").get<int>();
  return *a;
}

std::string_view role_name(const Observation& obs) {
  return std::visit(
      [](const auto& o) -> std::string_view {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, agents::HospitalObservation>) return "hospital";
        else if constexpr (std::is_same_v<T, agents::DistributorObservation>) return "distributor";
        else return "manufacturer";
      },
      obs);
}

json observation_json(const agents::HospitalObservation& o) {
  return {{"inventory", o.inventory},       {"pipeline", o.pipeline},
          {"buffer_target", o.buffer_target}, {"backlog", o.backlog},
          {"criticality_weight", o.criticality_weight}, {"forecast", o.forecast}};
}

json observation_json(const agents::DistributorObservation& o) {
  json orders = json::array();
  for (const auto& m : o.orders)
    orders.push_back({{"hospital", agent_json(m.hospital)},
                      {"quantity", m.quantity},
                      {"forecast", m.forecast},
                      {"criticality", m.criticality}});
  return {{"inventory", o.inventory}, {"pipeline", o.pipeline}, {"disrupted", o.disrupted}, {"orders", orders}};
}

json observation_json(const agents::ManufacturerObservation& o) {
  json demand = json::array();
  for (const auto& m : o.demand)
    demand.push_back({{"distributor", agent_json(m.distributor)},
                      {"region", m.region},
                      {"total", m.total},
                      {"disrupted", m.disrupted}});
  return {{"available", o.available}, {"production", o.production},
          {"disrupted", o.disrupted}, {"severity", o.severity},
          {"regional_cases", o.regional_cases}, {"demand", demand},
          {"alpha", o.alpha},         {"epsilon", o.epsilon}};
}

void require_keys(const json& j, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional, const std::string& where) {
  if (!j.is_object()) schema(where + " is not an object");
  std::set<std::string_view> allowed(required);
  allowed.insert(optional.begin(), optional.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) schema(where + ": unexpected key '" + k + "'");
  for (auto k : required)
    if (!j.contains(std::string(k))) schema(where + ": missing key '" + std::string(k) + "'");
}

PerDrug<Units> quantities(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) schema(where + ": expected " + std::to_string(n) + " quantities");
  PerDrug<Units> out;
  for (const auto& v : j) {
    if (v.is_number_unsigned()) {
      if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(kMaxWireQuantity)) schema(where + ": quantity too large");
      out.push_back(static_cast<Units>(v.get<std::uint64_t>()));
    } else if (v.is_number_integer()) {
      schema(where + ": negative quantity " + v.dump());
    } else {
      schema(where + ": quantity is not an integer");
    }
  }
  return out;
}

std::vector<double> reals(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) schema(where + ": expected " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) schema(where + ": not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0) schema(where + ": out of range");
    out.push_back(x);
  }
  return out;
}

}  // namespace

AgentId agent_of(const Observation& obs) {
  return std::visit([](const auto& o) { return o.agent; }, obs);
}

Day day_of(const Observation& obs) {
  return std::visit([](const auto& o) { return o.day; }, obs);
}

std::string encode_request(const Observation& obs, int deadline_ms) {
  json j;
  j["protocol_version"] = kProtocolVersion;
  j["day"] = day_of(obs);
  j["agent"] = agent_json(agent_of(obs));
  j["role"] = role_name(obs);
  j["deadline_ms"] = deadline_ms;
  j["observation"] = std::visit([](const auto& o) { return observation_json(o); }, obs);
  return j.dump();
}

Observation decode_request(std::string_view line) {
  try {
    const json j = json::parse(line);
    if (j.at("protocol_version").get<int>() != kProtocolVersion) throw WireError("schema", "protocol version");
    const Day day = j.at("day").get<Day>();
    const AgentId agent = agent_from(j.at("agent"));
    const std::string role = j.at("role").get<std::string>();
    const json& o = j.at("observation");
    using U = PerDrug<Units>;
    using R = std::vector<double>;
    if (role == "hospital") {
      return agents::HospitalObservation{day,
                                         agent,
                                         o.at("inventory").get<U>(),
                                         o.at("pipeline").get<U>(),
                                         o.at("buffer_target").get<U>(),
                                         o.at("backlog").get<U>(),
                                         o.at("criticality_weight").get<R>(),
                                         o.at("forecast").get<R>()};
    }
    if (role == "distributor") {
      agents::DistributorObservation d{day, agent, o.at("inventory").get<U>(), o.at("pipeline").get<U>(),
                                       o.at("disrupted").get<bool>(), {}};
      for (const auto& m : o.at("orders"))
        d.orders.push_back({agent_from(m.at("hospital")), m.at("quantity").get<U>(), m.at("forecast").get<R>(),
                            m.at("criticality").get<R>()});
      return d;
    }
    if (role == "manufacturer") {
      agents::ManufacturerObservation m;
      m.day = day;
      m.agent = agent;
      m.available = o.at("available").get<U>();
      m.production = o.at("production").get<U>();
      m.disrupted = o.at("disrupted").get<bool>();
      m.severity = o.at("severity").get<R>();
      m.regional_cases = o.at("regional_cases").get<R>();
      for (const auto& a : o.at("demand"))
        m.demand.push_back({agent_from(a.at("distributor")), a.at("region").get<int>(), a.at("total").get<U>(),
                            a.at("disrupted").get<bool>()});
      m.alpha = o.at("alpha").get<double>();
      m.epsilon = o.at("epsilon").get<double>();
      return m;
    }
    throw WireError("schema", "unknown role '" + role + "'");
  } catch (const json::exception& e) {
    throw WireError("malformed", e.what());
  }
}

std::string encode_response(const AgentId& agent, Day day, const Decision& decision) {
  json d = std::visit(
      [](const auto& dec) -> json {
        using T = std::decay_t<decltype(dec)>;
        if constexpr (std::is_same_v<T, agents::HospitalDecision>)
          return {{"orders", dec.orders}, {"criticality", dec.criticality}, {"forecast", dec.forecast}};
        else if constexpr (std::is_same_v<T, agents::DistributorDecision>)
          return {{"shipments", dec.shipments}};
        else
          return {{"allocation", dec.allocation}};
      },
      decision);
  json j{{"protocol_version", kProtocolVersion}, {"agent_id", agent.name()}, {"day", day}, {"decision", d}};
  return j.dump();
}

Decision decode_response(std::string_view line, const Observation& obs) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw WireError("malformed", e.what());
  }
  require_keys(j, {"protocol_version", "agent_id", "day", "decision"}, {}, "response");
  if (!j["protocol_version"].is_number_integer() || j["protocol_version"].get<std::int64_t>() != kProtocolVersion)
    schema("unsupported protocol_version");
  const AgentId agent = agent_of(obs);
  if (!j["agent_id"].is_string() || j["agent_id"].get<std::string>() != agent.name())
    schema("agent_id does not echo the request");
  if (!j["day"].is_number_integer() || j["day"].get<std::int64_t>() != day_of(obs))
    schema("day does not echo the request");
  const json& d = j["decision"];

  return std::visit(
      [&](const auto& o) -> Decision {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, agents::HospitalObservation>) {
          require_keys(d, {"orders"}, {"criticality", "forecast"}, "decision");
          const auto n = o.inventory.size();
          agents::HospitalDecision h;
          h.orders = quantities(d["orders"], n, "orders");
          if (d.contains("criticality")) h.criticality = reals(d["criticality"], n, "criticality");
          if (d.contains("forecast")) h.forecast = reals(d["forecast"], n, "forecast");
          return h;
        } else if constexpr (std::is_same_v<T, agents::DistributorObservation>) {
          require_keys(d, {"shipments"}, {}, "decision");
          const json& rows = d["shipments"];
          if (!rows.is_array() || rows.size() != o.orders.size()) schema("one shipment row per order required");
          agents::DistributorDecision out;
          for (std::size_t k = 0; k < rows.size(); ++k)
            out.shipments.push_back(quantities(rows[k], o.inventory.size(), "shipments[" + std::to_string(k) + "]"));
          return out;
        } else {
          require_keys(d, {"allocation"}, {}, "decision");
          const json& rows = d["allocation"];
          const auto regions = o.severity.size();
          if (!rows.is_array() || rows.size() != regions) schema("one allocation row per region required");
          agents::ManufacturerDecision out;
          for (std::size_t r = 0; r < regions; ++r)
            out.allocation.push_back(quantities(rows[r], o.available.size(), "allocation[" + std::to_string(r) + "]"));
          return out;
        }
      },
      obs);
}

Decision builtin_decide(const Observation& obs) {
  return std::visit(
      [](const auto& o) -> Decision {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, agents::HospitalObservation>) return agents::hospital_decide(o);
        else if constexpr (std::is_same_v<T, agents::DistributorObservation>) return agents::distributor_decide(o);
        else return agents::manufacturer_decide(o);
      },
      obs);
}

}  // namespace medsim::policy
