#include "medsim/scenario/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace medsim::scenario {

using nlohmann::json;

namespace {

// Defaults sized for ~3000 peak infected per region (N = 10000, R0 = 3).
constexpr std::int64_t kDefaultPopulation = 10000;
constexpr double kDefaultGamma = 0.1;
constexpr Units kDefaultBuffer = 10000;
constexpr Units kDefaultCapacity = 15000;
constexpr Units kDefaultReserve = 20000;
constexpr Units kDefaultDistributorStock = 10000;
constexpr double kDefaultDisruptionProbability = 0.1;

SIRParams default_sir(int region, double severity) {
  SIRParams p;
  p.beta = kBaselineBeta * severity;
  p.gamma = kDefaultGamma;
  p.population = kDefaultPopulation;
  p.initial_infected = 10.0 * (1 + (2 * region) % 3);
  return p;
}

double default_criticality(int drug) { return std::max(0.2, 1.0 - 0.2 * drug); }

template <typename T>
void resize_keep(std::vector<T>& v, std::size_t n, const T& fill) {
  if (v.size() > n) v.resize(n);
  while (v.size() < n) v.push_back(fill);
}

}  // namespace

double DisruptionParams::probability_for(const std::string& agent) const {
  auto it = per_agent_probability.find(agent);
  return it == per_agent_probability.end() ? default_probability : it->second;
}

bool ScenarioConfig::production_halted(Day day) const {
  return std::any_of(production_outages.begin(), production_outages.end(),
                     [day](const ProductionOutage& o) {
                       return day >= o.first_day && day <= o.last_day;
                     });
}

void conform_sizes(ScenarioConfig& c, double severity) {
  const auto regions = static_cast<std::size_t>(std::max(c.num_regions, 0));
  const auto drugs = static_cast<std::size_t>(std::max(c.num_drugs, 0));
  while (c.sir_params.size() < regions)
    c.sir_params.push_back(default_sir(static_cast<int>(c.sir_params.size()), severity));
  c.sir_params.resize(regions);
  while (c.drug_criticality.size() < drugs)
    c.drug_criticality.push_back(default_criticality(static_cast<int>(c.drug_criticality.size())));
  c.drug_criticality.resize(drugs);
  resize_keep(c.buffer_targets, regions, std::vector<Units>(drugs, kDefaultBuffer));
  for (auto& row : c.buffer_targets) resize_keep(row, drugs, kDefaultBuffer);
  resize_keep(c.distributor_initial_stock, regions,
              std::vector<Units>(drugs, kDefaultDistributorStock));
  for (auto& row : c.distributor_initial_stock) resize_keep(row, drugs, kDefaultDistributorStock);
  resize_keep(c.manufacturer_capacity, drugs, kDefaultCapacity);
  resize_keep(c.reserve_stock, drugs, kDefaultReserve);
  resize_keep(c.manufacturer_initial_stock, drugs, Units{0});
}

ScenarioConfig default_config(int regions, int drugs, int days, double severity) {
  ScenarioConfig c;
  c.num_regions = regions;
  c.num_drugs = drugs;
  c.horizon_days = days;
  c.disruption.default_probability = kDefaultDisruptionProbability;
  conform_sizes(c, severity);
  return c;
}

void validate(const ScenarioConfig& c) {
  if (c.num_regions < 1) throw ConfigError("num_regions must be >= 1");
  if (c.num_drugs < 1) throw ConfigError("num_drugs must be >= 1");
  if (c.horizon_days < 1) throw ConfigError("horizon_days must be >= 1");
  if (c.lead_time_days < 0) throw ConfigError("lead_time_days must be >= 0");
  const auto regions = static_cast<std::size_t>(c.num_regions);
  const auto drugs = static_cast<std::size_t>(c.num_drugs);

  if (c.sir_params.size() != regions) throw ConfigError("sir_params must have num_regions entries");
  for (const auto& p : c.sir_params) validate(p);

  if (c.drug_criticality.size() != drugs)
    throw ConfigError("drug_criticality must have num_drugs entries");
  for (double w : c.drug_criticality)
    if (!std::isfinite(w) || w < 0.0 || w > 1.0)
      throw ConfigError("drug_criticality entries must lie in [0, 1]");

  auto check_prob = [](double p, const std::string& what) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      throw ConfigError("disruption probability for " + what + " must lie in [0, 1]");
  };
  check_prob(c.disruption.default_probability, "default");
  for (const auto& [agent, p] : c.disruption.per_agent_probability) {
    if (!parse_agent_name(agent)) throw ConfigError("disruption: unknown agent name '" + agent + "'");
    check_prob(p, agent);
  }

  if (!std::isfinite(c.alpha) || c.alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (!std::isfinite(c.epsilon) || c.epsilon < 0.0)
    throw ConfigError("epsilon must be >= 0");
  if (c.epsilon * c.num_regions > 1.0 + 1e-12)
    throw ConfigError("epsilon * num_regions must be <= 1");
  if (!std::isfinite(c.demand_noise_frac) || c.demand_noise_frac < 0.0)
    throw ConfigError("demand_noise_frac must be >= 0");

  auto check_matrix = [&](const std::vector<std::vector<Units>>& m, const std::string& name) {
    if (m.size() != regions) throw ConfigError(name + " must have num_regions rows");
    for (const auto& row : m) {
      if (row.size() != drugs) throw ConfigError(name + " rows must have num_drugs entries");
      for (Units u : row)
        if (u < 0) throw ConfigError(name + " entries must be >= 0");
    }
  };
  auto check_vector = [&](const std::vector<Units>& v, const std::string& name) {
    if (v.size() != drugs) throw ConfigError(name + " must have num_drugs entries");
    for (Units u : v)
      if (u < 0) throw ConfigError(name + " entries must be >= 0");
  };
  check_matrix(c.buffer_targets, "buffer_targets");
  check_matrix(c.distributor_initial_stock, "distributor_initial_stock");
  check_vector(c.manufacturer_capacity, "manufacturer_capacity");
  check_vector(c.reserve_stock, "reserve_stock");
  check_vector(c.manufacturer_initial_stock, "manufacturer_initial_stock");
  for (const auto& o : c.production_outages)
    if (o.first_day < 0 || o.last_day < o.first_day)
      throw ConfigError("production_outages windows need 0 <= first_day <= last_day");
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["num_regions"] = c.num_regions;
  j["num_drugs"] = c.num_drugs;
  j["horizon_days"] = c.horizon_days;
  j["sir_params"] = json::array();
  for (const auto& p : c.sir_params) {
    j["sir_params"].push_back({{"beta", p.beta},
                               {"gamma", p.gamma},
                               {"population", p.population},
                               {"initial_infected", p.initial_infected}});
  }
  j["drug_criticality"] = c.drug_criticality;
  j["disruption"] = {{"per_agent_probability", c.disruption.per_agent_probability},
                     {"default_probability", c.disruption.default_probability}};
  j["alpha"] = c.alpha;
  j["epsilon"] = c.epsilon;
  j["buffer_targets"] = c.buffer_targets;
  j["lead_time_days"] = c.lead_time_days;
  j["manufacturer_capacity"] = c.manufacturer_capacity;
  j["reserve_stock"] = c.reserve_stock;
  j["demand_noise_frac"] = c.demand_noise_frac;
  j["seed"] = c.seed;
  j["distributor_initial_stock"] = c.distributor_initial_stock;
  j["manufacturer_initial_stock"] = c.manufacturer_initial_stock;
  j["production_outages"] = json::array();
  for (const auto& o : c.production_outages)
    j["production_outages"].push_back({{"first_day", o.first_day}, {"last_day", o.last_day}});
  return j;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_as(const json& v, const std::string& name) {
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(name + " must be a number");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

std::vector<Units> units_vector(const json& v, std::size_t n, const std::string& name) {
  if (v.is_number()) return std::vector<Units>(n, get_as<Units>(v, name));
  if (!v.is_array()) throw ConfigError(name + " must be an array or a scalar");
  std::vector<Units> out;
  for (const auto& e : v) out.push_back(get_as<Units>(e, name));
  return out;
}

std::vector<std::vector<Units>> units_matrix(const json& v, std::size_t rows, std::size_t cols,
                                             const std::string& name) {
  if (v.is_number()) return std::vector<std::vector<Units>>(rows, units_vector(v, cols, name));
  if (!v.is_array()) throw ConfigError(name + " must be an array or a scalar");
  std::vector<std::vector<Units>> out;
  for (const auto& row : v) out.push_back(units_vector(row, cols, name));
  return out;
}

}  // namespace

ScenarioConfig config_from_json(const json& doc) {
  static const std::set<std::string> kKeys = {
      "num_regions",     "num_drugs",         "horizon_days",
      "sir_params",      "drug_criticality",  "disruption",
      "alpha",           "epsilon",           "buffer_targets",
      "lead_time_days",  "manufacturer_capacity", "reserve_stock",
      "demand_noise_frac", "seed",            "distributor_initial_stock",
      "manufacturer_initial_stock", "production_outages"};
  reject_unknown(doc, kKeys, "scenario config");

  ScenarioConfig c;
  if (doc.contains("num_regions")) c.num_regions = get_as<int>(doc["num_regions"], "num_regions");
  if (doc.contains("num_drugs")) c.num_drugs = get_as<int>(doc["num_drugs"], "num_drugs");
  if (doc.contains("horizon_days"))
    c.horizon_days = get_as<int>(doc["horizon_days"], "horizon_days");
  if (c.num_regions < 1) throw ConfigError("num_regions must be >= 1");
  if (c.num_drugs < 1) throw ConfigError("num_drugs must be >= 1");
  const auto regions = static_cast<std::size_t>(c.num_regions);
  const auto drugs = static_cast<std::size_t>(c.num_drugs);

  c.disruption.default_probability = 0.1;
  if (doc.contains("sir_params")) {
    if (!doc["sir_params"].is_array()) throw ConfigError("sir_params must be an array");
    for (const auto& e : doc["sir_params"]) {
      reject_unknown(e, {"beta", "gamma", "population", "initial_infected"}, "sir_params entry");
      SIRParams p;
      if (e.contains("beta")) p.beta = get_as<double>(e["beta"], "beta");
      if (e.contains("gamma")) p.gamma = get_as<double>(e["gamma"], "gamma");
      if (e.contains("population"))
        p.population = get_as<std::int64_t>(e["population"], "population");
      if (e.contains("initial_infected"))
        p.initial_infected = get_as<double>(e["initial_infected"], "initial_infected");
      c.sir_params.push_back(p);
    }
  }
  if (doc.contains("drug_criticality")) {
    const auto& v = doc["drug_criticality"];
    if (v.is_number()) {
      c.drug_criticality.assign(drugs, get_as<double>(v, "drug_criticality"));
    } else if (v.is_array()) {
      for (const auto& e : v) c.drug_criticality.push_back(get_as<double>(e, "drug_criticality"));
    } else {
      throw ConfigError("drug_criticality must be an array or a scalar");
    }
  }
  if (doc.contains("disruption")) {
    const auto& d = doc["disruption"];
    reject_unknown(d, {"per_agent_probability", "default_probability"}, "disruption");
    if (d.contains("default_probability"))
      c.disruption.default_probability = get_as<double>(d["default_probability"], "default_probability");
    if (d.contains("per_agent_probability")) {
      if (!d["per_agent_probability"].is_object())
        throw ConfigError("per_agent_probability must be an object");
      for (const auto& [agent, p] : d["per_agent_probability"].items())
        c.disruption.per_agent_probability[agent] = get_as<double>(p, "per_agent_probability");
    }
  }
  if (doc.contains("alpha")) c.alpha = get_as<double>(doc["alpha"], "alpha");
  if (doc.contains("epsilon")) c.epsilon = get_as<double>(doc["epsilon"], "epsilon");
  if (doc.contains("buffer_targets"))
    c.buffer_targets = units_matrix(doc["buffer_targets"], regions, drugs, "buffer_targets");
  if (doc.contains("lead_time_days"))
    c.lead_time_days = get_as<int>(doc["lead_time_days"], "lead_time_days");
  if (doc.contains("manufacturer_capacity"))
    c.manufacturer_capacity = units_vector(doc["manufacturer_capacity"], drugs, "manufacturer_capacity");
  if (doc.contains("reserve_stock"))
    c.reserve_stock = units_vector(doc["reserve_stock"], drugs, "reserve_stock");
  if (doc.contains("demand_noise_frac"))
    c.demand_noise_frac = get_as<double>(doc["demand_noise_frac"], "demand_noise_frac");
  if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc["seed"], "seed");
  if (doc.contains("distributor_initial_stock"))
    c.distributor_initial_stock =
        units_matrix(doc["distributor_initial_stock"], regions, drugs, "distributor_initial_stock");
  if (doc.contains("manufacturer_initial_stock"))
    c.manufacturer_initial_stock =
        units_vector(doc["manufacturer_initial_stock"], drugs, "manufacturer_initial_stock");
  if (doc.contains("production_outages")) {
    if (!doc["production_outages"].is_array())
      throw ConfigError("production_outages must be an array");
    for (const auto& e : doc["production_outages"]) {
      reject_unknown(e, {"first_day", "last_day"}, "production_outages entry");
      if (!e.contains("first_day") || !e.contains("last_day"))
        throw ConfigError("production_outages entries need first_day and last_day");
      c.production_outages.push_back(
          {get_as<int>(e["first_day"], "first_day"), get_as<int>(e["last_day"], "last_day")});
    }
  }

  // Explicit arrays of the wrong length are errors, so only fill what is absent.
  if (!doc.contains("sir_params")) {
    for (std::size_t r = 0; r < regions; ++r)
      c.sir_params.push_back(default_sir(static_cast<int>(r), 0.8));
  }
  ScenarioConfig sized = c;
  conform_sizes(sized);
  if (!doc.contains("drug_criticality")) c.drug_criticality = sized.drug_criticality;
  if (!doc.contains("buffer_targets")) c.buffer_targets = sized.buffer_targets;
  if (!doc.contains("distributor_initial_stock"))
    c.distributor_initial_stock = sized.distributor_initial_stock;
  if (!doc.contains("manufacturer_capacity")) c.manufacturer_capacity = sized.manufacturer_capacity;
  if (!doc.contains("reserve_stock")) c.reserve_stock = sized.reserve_stock;
  if (!doc.contains("manufacturer_initial_stock"))
    c.manufacturer_initial_stock = sized.manufacturer_initial_stock;

  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

std::string canonical_config_text(const ScenarioConfig& config) { return to_json(config).dump(); }

}  // namespace medsim::scenario
