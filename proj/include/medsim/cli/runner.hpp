#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "medsim/coordination/round.hpp"
#include "medsim/crosslayer/snapshot.hpp"
#include "medsim/metrics/metrics.hpp"
#include "medsim/policy/adapter.hpp"
#include "medsim/scenario/config.hpp"

namespace medsim::cli {

inline constexpr const char* kVersion = "medsim 1.0.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitInvariant = 2, kExitAudit = 3 };

/// Artifact file names inside a run directory.
namespace files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kRoundLog = "round_log.csv";
inline constexpr const char* kChain = "audit_chain.log";
inline constexpr const char* kStore = "store";
inline constexpr const char* kReceipts = "receipts.csv";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kMetricsCsv = "metrics.csv";
inline constexpr const char* kSir = "timeline_sir.csv";
inline constexpr const char* kDemand = "timeline_demand.csv";
inline constexpr const char* kInventory = "inventory.csv";
inline constexpr const char* kHospitalService = "hospital_service.csv";
inline constexpr const char* kWarehouseFlow = "warehouse_flow.csv";
inline constexpr const char* kPolicyEvents = "policy_events.csv";
}  // namespace files

/// Command-line overrides on top of a config file or the defaults.
struct Overrides {
  std::optional<int> regions, drugs, days;
  std::optional<double> alpha, epsilon, disruption_prob, severity;
  std::optional<std::uint64_t> seed;
};

/// Loads `config_path` (or the defaults when empty), applies the overrides and
/// validates. Throws ConfigError.
scenario::ScenarioConfig resolve_config(const std::string& config_path, const Overrides& overrides);

struct RunOptions {
  scenario::ScenarioConfig config;
  std::string policy = "builtin";  // or "external:<command>"
  int policy_timeout_ms = policy::kDefaultTimeoutMs;
  std::filesystem::path out_dir;
};

/// What a run exposes per day to an observer, after deployments are applied.
struct DayTrace {
  const coordination::RoundOutcome& outcome;
  const coordination::WorldState& world;
  const crosslayer::SubmissionReceipt& receipt;
};
using DayObserver = std::function<void(const DayTrace&)>;

struct RunResult {
  std::filesystem::path out_dir;
  metrics::MetricsReport metrics;
  Digest head;
  std::size_t chain_length = 0;
  int rejected_submissions = 0;
};

/// Runs build → coordinate → snapshot → submit → log for every day and writes
/// all artifacts. A rejected snapshot is logged, then the round is re-run with
/// the recorded hospital and distributor decisions and the built-in
/// manufacturer, and resubmitted. Throws ConfigError or InvariantViolation.
RunResult run_simulation(const RunOptions& options, const DayObserver& observer = {});

/// True when some snapshot_commit record stamped `day` references content
/// that is present and re-hashes to the recorded digest.
bool snapshot_verifies(std::span<const ledger::AuditRecord> chain, const ledger::ContentStore& store, Day day);

/// Rebuilds the metrics input from a run directory's exported files.
/// Throws metrics::MetricsError or ConfigError on missing or inconsistent files.
metrics::MetricsInput load_metrics_input(const std::filesystem::path& run_dir);

/// Chain, every referenced store object, and the manifest head when present.
crosslayer::AuditFinding verify_run(const std::filesystem::path& chain_path, const std::filesystem::path& store_dir,
                                    std::optional<Digest> expected_head = std::nullopt);

struct ReplayReport {
  int exit_code = kExitOk;
  std::string message;  // empty diff on success, else the first divergence
};

/// Re-runs the manifest's config and compares the round log byte for byte and
/// the audit head. `seed` replaces the recorded seed.
ReplayReport replay(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> seed = std::nullopt);

/// Writes `content` to a temp file in the same directory, then renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace medsim::cli
