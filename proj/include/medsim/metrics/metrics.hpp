#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/core/types.hpp"
#include "medsim/ledger/audit.hpp"

namespace medsim::metrics {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr int kUnrecovered = -1;

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One stockout episode: opening inventory fell below θ on `start`; `tau` days
/// later it was back at the buffer target, or kUnrecovered.
struct Episode {
  int hospital = 0;
  int drug = 0;
  Day start = 0;
  int tau = kUnrecovered;

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Recovery times over one inventory series. An episode opens on a day with
/// I < θ outside another episode and closes on the first day with I ≥ B.
std::vector<Episode> resilience(std::span<const Units> series, Units theta, Units buffer);

/// θ default: 10% of B, rounded down.
Units default_theta(Units buffer);

/// δ_r = |x_r/Σx − w_r/Σw|. All zeros when both sides are all-zero; nullopt
/// (an undefined day) when exactly one side is.
std::optional<std::vector<double>> fairness_deviation(std::span<const double> alloc,
                                                      std::span<const double> weights);

/// η = Σo/Σd; nullopt on a no-demand day.
std::optional<double> fulfillment_efficiency(std::span<const Units> fulfilled,
                                             std::span<const Units> requested);

/// Records stamped `day`. Throws MetricsError if the chain does not verify.
std::size_t throughput(std::span<const ledger::AuditRecord> chain, Day day);

/// Everything the metrics need about one simulated day. Per-hospital and
/// per-region matrices are [entity][drug].
struct DayRecord {
  Day day = 0;
  std::vector<PerDrug<Units>> opening;    // hospital inventory after delivery
  std::vector<PerDrug<Units>> demand;     // new patient demand
  std::vector<PerDrug<Units>> served;
  std::vector<PerDrug<Units>> ordered;    // r_k
  std::vector<PerDrug<Units>> fulfilled;  // y_{j,k}
  std::vector<PerDrug<Units>> allocation; // x_r
  std::vector<double> infected;           // I_r per region
  bool snapshot_verified = false;

  friend bool operator==(const DayRecord&, const DayRecord&) = default;
};

struct MetricsInput {
  std::vector<DayRecord> days;
  std::vector<PerDrug<Units>> buffer;  // [hospital][drug]
  PerDrug<double> criticality;
  std::vector<ledger::AuditRecord> chain;
  int fallbacks = 0;
  int clamps = 0;
};

struct DayMetrics {
  Day day = 0;
  std::optional<double> eta;
  std::optional<std::vector<double>> delta;                 // across drugs
  std::vector<std::optional<std::vector<double>>> delta_by_drug;
  std::size_t throughput = 0;
  bool snapshot_verified = false;
};

struct MetricsReport {
  std::vector<DayMetrics> days;
  std::vector<Episode> episodes;
  std::vector<int> stockout_days;  // per hospital: days with some drug below θ
  double service_level = 100.0;    // 100·Σfulfilled/Σordered
  double unfulfilled_pct = 0.0;
  double demand_served_pct = 100.0;  // 100·Σserved/Σdemand at the hospitals
  std::optional<double> mean_eta;
  std::optional<double> mean_delta;
  std::optional<double> mean_tau;           // recovered episodes only
  std::optional<double> mean_tau_censored;  // unrecovered counted to the horizon
  int unrecovered_episodes = 0;
  int no_demand_days = 0;
  int undefined_delta_days = 0;
  std::size_t total_throughput = 0;
  std::size_t chain_length = 0;
  double auditability = 1.0;  // fraction of days whose snapshot verifies
  int fallbacks = 0;
  int clamps = 0;
};

/// Aggregates a whole run. Throws MetricsError when the chain does not verify
/// or a day has no snapshot_commit record.
MetricsReport service_summary(const MetricsInput& input);

nlohmann::json to_json(const MetricsReport& report);
/// `day,eta,delta_mean,delta_max,throughput,snapshot_verified`; empty cells for undefined values.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

}  // namespace medsim::metrics
