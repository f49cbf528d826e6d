#include "medsim/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "medsim/scenario/timeline.hpp"

namespace medsim::metrics {

std::vector<Episode> resilience(std::span<const Units> series, Units theta, Units buffer) {
  std::vector<Episode> out;
  std::size_t t = 0;
  while (t < series.size()) {
    if (series[t] >= theta) {
      ++t;
      continue;
    }
    Episode e;
    e.start = static_cast<Day>(t);
    std::size_t u = t + 1;
    while (u < series.size() && series[u] < buffer) ++u;
    if (u < series.size()) e.tau = static_cast<int>(u - t);
    out.push_back(e);
    t = u;
  }
  return out;
}

Units default_theta(Units buffer) { return buffer / 10; }

std::optional<std::vector<double>> fairness_deviation(std::span<const double> alloc,
                                                      std::span<const double> weights) {
  const double sx = std::accumulate(alloc.begin(), alloc.end(), 0.0);
  const double sw = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (sx <= 0.0 && sw <= 0.0) return std::vector<double>(alloc.size(), 0.0);
  if (sx <= 0.0 || sw <= 0.0) return std::nullopt;
  std::vector<double> out(alloc.size());
  for (std::size_t r = 0; r < alloc.size(); ++r) out[r] = std::abs(alloc[r] / sx - weights[r] / sw);
  return out;
}

std::optional<double> fulfillment_efficiency(std::span<const Units> fulfilled, std::span<const Units> requested) {
  const Units d = std::accumulate(requested.begin(), requested.end(), Units{0});
  if (d <= 0) return std::nullopt;
  const Units o = std::accumulate(fulfilled.begin(), fulfilled.end(), Units{0});
  return static_cast<double>(o) / static_cast<double>(d);
}

std::size_t throughput(std::span<const ledger::AuditRecord> chain, Day day) {
  if (const auto v = ledger::verify_chain(chain); !v.ok)
    throw MetricsError("throughput: audit chain fails at record " + std::to_string(v.first_bad));
  return static_cast<std::size_t>(
      std::count_if(chain.begin(), chain.end(), [&](const auto& r) { return r.timestamp == day; }));
}

namespace {

template <typename T>
std::optional<double> mean(const std::vector<T>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Units sum_matrix(const std::vector<PerDrug<Units>>& m) {
  Units s = 0;
  for (const auto& row : m) s = std::accumulate(row.begin(), row.end(), s);
  return s;
}

}  // namespace

MetricsReport service_summary(const MetricsInput& in) {
  if (const auto v = ledger::verify_chain(in.chain); !v.ok)
    throw MetricsError("audit chain fails at record " + std::to_string(v.first_bad) + ": " + v.reason);
  std::set<Day> committed;
  for (const auto& r : in.chain)
    if (r.action == ledger::AuditAction::snapshot_commit) committed.insert(r.timestamp);

  MetricsReport rep;
  rep.fallbacks = in.fallbacks;
  rep.clamps = in.clamps;
  rep.chain_length = in.chain.size();
  const std::size_t hospitals = in.buffer.size();
  const std::size_t drugs = in.criticality.size();
  Units ordered = 0, fulfilled = 0, demand = 0, served = 0;
  std::vector<double> etas, deltas;
  std::size_t verified = 0;

  for (const auto& d : in.days) {
    if (!committed.count(d.day))
      throw MetricsError("day " + std::to_string(d.day) + " is absent from the audit chain");
    if (d.opening.size() != hospitals || d.allocation.size() != d.infected.size())
      throw MetricsError("day " + std::to_string(d.day) + ": truncated log");
    DayMetrics m;
    m.day = d.day;
    m.snapshot_verified = d.snapshot_verified;
    verified += d.snapshot_verified ? 1 : 0;
    m.throughput = static_cast<std::size_t>(
        std::count_if(in.chain.begin(), in.chain.end(), [&](const auto& r) { return r.timestamp == d.day; }));
    rep.total_throughput += m.throughput;

    std::vector<Units> o, q;
    for (std::size_t k = 0; k < hospitals; ++k)
      for (std::size_t j = 0; j < drugs; ++j) {
        o.push_back(d.fulfilled[k][j]);
        q.push_back(d.ordered[k][j]);
      }
    m.eta = fulfillment_efficiency(o, q);
    if (m.eta) etas.push_back(*m.eta);
    else ++rep.no_demand_days;
    ordered += sum_matrix(d.ordered);
    fulfilled += sum_matrix(d.fulfilled);
    demand += sum_matrix(d.demand);
    served += sum_matrix(d.served);

    const std::size_t regions = d.allocation.size();
    std::vector<double> x(regions, 0.0), w(regions, 0.0);
    for (std::size_t r = 0; r < regions; ++r)
      for (std::size_t j = 0; j < drugs; ++j) {
        x[r] += static_cast<double>(d.allocation[r][j]);
        w[r] += d.infected[r] * in.criticality[j];
      }
    m.delta = fairness_deviation(x, w);
    if (m.delta) deltas.insert(deltas.end(), m.delta->begin(), m.delta->end());
    else ++rep.undefined_delta_days;
    for (std::size_t j = 0; j < drugs; ++j) {
      std::vector<double> xd(regions), wd(regions);
      for (std::size_t r = 0; r < regions; ++r) {
        xd[r] = static_cast<double>(d.allocation[r][j]);
        wd[r] = d.infected[r] * in.criticality[j];
      }
      m.delta_by_drug.push_back(fairness_deviation(xd, wd));
    }
    rep.days.push_back(std::move(m));
  }

  rep.stockout_days.assign(hospitals, 0);
  const auto horizon = static_cast<int>(in.days.size());
  std::vector<int> recovered, censored;
  for (std::size_t k = 0; k < hospitals; ++k) {
    for (std::size_t j = 0; j < drugs; ++j) {
      std::vector<Units> series;
      for (const auto& d : in.days) series.push_back(d.opening[k][j]);
      for (auto e : resilience(series, default_theta(in.buffer[k][j]), in.buffer[k][j])) {
        e.hospital = static_cast<int>(k);
        e.drug = static_cast<int>(j);
        rep.episodes.push_back(e);
        if (e.tau == kUnrecovered) {
          ++rep.unrecovered_episodes;
          censored.push_back(horizon - e.start);
        } else {
          recovered.push_back(e.tau);
          censored.push_back(e.tau);
        }
      }
    }
    for (const auto& d : in.days) {
      bool low = false;
      for (std::size_t j = 0; j < drugs; ++j) low = low || d.opening[k][j] < default_theta(in.buffer[k][j]);
      rep.stockout_days[k] += low ? 1 : 0;
    }
  }

  rep.service_level = ordered > 0 ? 100.0 * static_cast<double>(fulfilled) / static_cast<double>(ordered) : 100.0;
  rep.unfulfilled_pct = 100.0 - rep.service_level;
  rep.demand_served_pct = demand > 0 ? 100.0 * static_cast<double>(served) / static_cast<double>(demand) : 100.0;
  rep.mean_eta = mean(etas);
  rep.mean_delta = mean(deltas);
  rep.mean_tau = mean(recovered);
  rep.mean_tau_censored = mean(censored);
  rep.auditability = in.days.empty() ? 1.0 : static_cast<double>(verified) / static_cast<double>(in.days.size());
  return rep;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json opt(const std::optional<std::vector<double>>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string cell(const std::optional<double>& v) { return v ? scenario::format_double(*v) : std::string(); }

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["service_level"] = r.service_level;
  j["unfulfilled_pct"] = r.unfulfilled_pct;
  j["demand_served_pct"] = r.demand_served_pct;
  j["mean_eta"] = opt(r.mean_eta);
  j["mean_delta"] = opt(r.mean_delta);
  j["mean_tau"] = opt(r.mean_tau);
  j["mean_tau_censored"] = opt(r.mean_tau_censored);
  j["unrecovered_episodes"] = r.unrecovered_episodes;
  j["no_demand_days"] = r.no_demand_days;
  j["undefined_delta_days"] = r.undefined_delta_days;
  j["total_throughput"] = r.total_throughput;
  j["chain_length"] = r.chain_length;
  j["auditability"] = r.auditability;
  j["fallbacks"] = r.fallbacks;
  j["clamps"] = r.clamps;
  j["stockout_days"] = r.stockout_days;
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes)
    j["episodes"].push_back({{"hospital", e.hospital}, {"drug", e.drug}, {"start", e.start},
                             {"tau", e.tau == kUnrecovered ? nlohmann::json(nullptr) : nlohmann::json(e.tau)}});
  j["days"] = nlohmann::json::array();
  for (const auto& d : r.days) {
    nlohmann::json by_drug = nlohmann::json::array();
    for (const auto& v : d.delta_by_drug) by_drug.push_back(opt(v));
    j["days"].push_back({{"day", d.day},
                         {"eta", opt(d.eta)},
                         {"delta", opt(d.delta)},
                         {"delta_by_drug", by_drug},
                         {"throughput", d.throughput},
                         {"snapshot_verified", d.snapshot_verified}});
  }
  return j;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  out << "day,eta,delta_mean,delta_max,throughput,snapshot_verified\n";
  for (const auto& d : r.days) {
    std::optional<double> dm, dx;
    if (d.delta && !d.delta->empty()) {
      dm = std::accumulate(d.delta->begin(), d.delta->end(), 0.0) / static_cast<double>(d.delta->size());
      dx = *std::max_element(d.delta->begin(), d.delta->end());
    }
    out << d.day << ',' << cell(d.eta) << ',' << cell(dm) << ',' << cell(dx) << ',' << d.throughput << ','
        << (d.snapshot_verified ? 1 : 0) << '\n';
  }
}

}  // namespace medsim::metrics
