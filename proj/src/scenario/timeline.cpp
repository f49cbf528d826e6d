#include "medsim/scenario/timeline.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace medsim::scenario {

DemandSample sample_demand(double infected, double criticality, double noise_frac,
                           RandomStream& rng) {
  const double mean = std::max(infected, 0.0) * criticality;
  const double sigma = noise_frac * mean;
  // Draw unconditionally so the stream position never depends on the inputs.
  const double z = rng.standard_normal();
  const double value = mean + sigma * z;
  DemandSample out;
  out.noise_sigma = sigma;
  out.expected = value > 0.0 ? static_cast<Units>(std::llround(value)) : 0;
  return out;
}

bool sample_disruption(double p, RandomStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("disruption probability must lie in [0, 1]");
  return rng.uniform() < p;
}

const SIRState& Timeline::sir(int region, Day day) const {
  if (region < 0 || region >= num_regions() || day < 0 || day >= horizon())
    throw std::out_of_range("Timeline::sir: region/day out of range");
  return sir_[static_cast<std::size_t>(region)][static_cast<std::size_t>(day)];
}

std::size_t Timeline::demand_index(Day day, int region, int drug) const {
  if (region < 0 || region >= num_regions() || day < 0 || day >= horizon() || drug < 0 ||
      drug >= num_drugs()) {
    throw std::out_of_range("Timeline::demand: index out of range");
  }
  return (static_cast<std::size_t>(day) * num_regions() + region) * num_drugs() + drug;
}

const DemandSample& Timeline::demand(Day day, int region, int drug) const {
  return demand_[demand_index(day, region, drug)];
}

double Timeline::projected_demand(int region, int drug, Day day) const {
  return sir(region, day).i * config_.drug_criticality.at(static_cast<std::size_t>(drug));
}

double Timeline::severity(int region, Day day) const {
  return sir(region, day).i /
         static_cast<double>(config_.sir_params[static_cast<std::size_t>(region)].population);
}

bool Timeline::disrupted(const std::string& agent, Day day) const {
  RandomStream rng(derive_seed(config_.seed, "disruption/" + agent,
                               {static_cast<std::uint64_t>(day)}));
  return sample_disruption(config_.disruption.probability_for(agent), rng);
}

std::size_t Timeline::sir_state_count() const {
  std::size_t n = 0;
  for (const auto& series : sir_) n += series.size();
  return n;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

void Timeline::write_sir_csv(std::ostream& out) const {
  out << "day,region,s,i,r\n";
  for (Day d = 0; d < horizon(); ++d)
    for (int r = 0; r < num_regions(); ++r) {
      const auto& st = sir(r, d);
      out << d << ',' << r << ',' << format_double(st.s) << ',' << format_double(st.i) << ','
          << format_double(st.r) << '\n';
    }
}

void Timeline::write_demand_csv(std::ostream& out) const {
  out << "day,region,drug,demand\n";
  for (Day d = 0; d < horizon(); ++d)
    for (int r = 0; r < num_regions(); ++r)
      for (int k = 0; k < num_drugs(); ++k)
        out << d << ',' << r << ',' << k << ',' << demand(d, r, k).expected << '\n';
}

Timeline generate_scenario(const ScenarioConfig& config) {
  validate(config);
  Timeline t;
  t.config_ = config;
  const auto regions = static_cast<std::size_t>(config.num_regions);
  const auto days = static_cast<std::size_t>(config.horizon_days);

  t.sir_.resize(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    const auto& params = config.sir_params[r];
    auto& series = t.sir_[r];
    series.reserve(days);
    series.push_back(initial_state(params));
    while (series.size() < days) series.push_back(integrate_sir(params, series.back(), 1.0));
  }

  t.demand_.reserve(days * regions * static_cast<std::size_t>(config.num_drugs));
  for (std::size_t d = 0; d < days; ++d)
    for (std::size_t r = 0; r < regions; ++r)
      for (int k = 0; k < config.num_drugs; ++k) {
        RandomStream rng(derive_seed(config.seed, "demand", {r, static_cast<std::uint64_t>(k), d}));
        auto sample = sample_demand(t.sir_[r][d].i, config.drug_criticality[static_cast<std::size_t>(k)],
                                    config.demand_noise_frac, rng);
        sample.region = static_cast<int>(r);
        sample.drug = k;
        t.demand_.push_back(sample);
      }
  return t;
}

}  // namespace medsim::scenario
