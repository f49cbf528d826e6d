#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medsim/core/digest.hpp"
#include "medsim/core/types.hpp"
#include "medsim/ledger/audit.hpp"

namespace medsim::ledger {

/// Machine-readable rejection reasons. Each failing check has its own code.
enum class Reject {
  none,
  budget,
  min_support,
  severity,
  duplicate_role,
  malformed_role,
  unknown_role,
  unauthorized,
  stale_timestamp,
  negative_balance,
  hash_mismatch,
  bad_mac,
  missing_content,
  malformed_snapshot,
  inventory_mismatch,
};

std::string_view to_string(Reject code);

struct RoleRecord {
  std::string role_id;
  AgentClass cls = AgentClass::hospital;
  Bytes auth_key;
};

inline constexpr std::size_t kMinKeyBytes = 16;
inline constexpr std::size_t kMaxKeyBytes = 64;

enum class DisruptionType { supply_halt, transit_delay };
std::string_view to_string(DisruptionType type);
std::optional<DisruptionType> parse_disruption_type(std::string_view text);

struct DisruptionReport {
  std::string agent_id;
  DisruptionType event_type = DisruptionType::supply_halt;
  Day timestamp = 0;

  friend bool operator==(const DisruptionReport&, const DisruptionReport&) = default;
};

struct TxReceipt {
  bool accepted = false;
  std::optional<std::uint64_t> tx_id;  // set when an audit record was appended
  Reject reason = Reject::none;
  std::string detail;
};

struct Verdict {
  Reject reason = Reject::none;
  std::string detail;
  bool ok() const { return reason == Reject::none; }
};

/// Allocation rules for one drug, checked in order:
///   budget       Σx ≤ Q
///   min_support  x_r ≥ min(floor(εQ), demand_r) wherever demand_r > 0
///   severity     φ_r ≥ φ_r' ⇒ x_r ≥ x_r' − 1, unless x_r ≥ demand_r (capped)
Verdict validate_allocation(std::span<const Units> alloc, Units available, double epsilon,
                            std::span<const double> phi, std::span<const Units> demand);

struct InventoryDelta {
  std::string agent_id;
  int drug = 0;
  Units delta = 0;
};

struct ReserveOutcome {
  TxReceipt report;
  TxReceipt deploy;
  PerDrug<Units> deployed;
};

/// The enforcement layer's state machine. Every mutating call either fully
/// applies (and appends audit records) or leaves the state untouched.
class Ledger {
 public:
  explicit Ledger(PerDrug<Units> reserve = {});

  TxReceipt register_role(const RoleRecord& record, Day day = 0);
  const RoleRecord* role(std::string_view role_id) const;

  /// Appends one audit record. Throws std::invalid_argument for an unknown role.
  const AuditRecord& append_audit(AuditAction action, std::string_view role_id,
                                  const Digest& payload_hash, Day day);

  /// Atomic batch of balance changes; rejected whole if any balance would go
  /// negative or an agent is unregistered.
  TxReceipt commit_inventory(std::string_view submitter, std::span<const InventoryDelta> batch,
                             Day day);
  Units balance(std::string_view agent_id, int drug) const;

  /// Deploys min(reserve, shortfall) per drug. Logs the report and the
  /// deployment as two records, even when nothing is deployed.
  ReserveOutcome report_disruption(const DisruptionReport& report, std::span<const Units> shortfall);

  const PerDrug<Units>& reserve() const { return reserve_; }
  const PerDrug<Units>& initial_reserve() const { return initial_reserve_; }
  const std::vector<AuditRecord>& chain() const { return chain_; }
  Digest head() const { return chain_.empty() ? Digest::zero() : chain_.back().record_hash; }

  /// Days at or before this are closed; reports and snapshots for them are stale.
  Day last_committed_day() const { return last_committed_day_; }
  void close_day(Day day);

  /// Full deterministic dump of the state, for atomicity checks.
  std::string state_text() const;

 private:
  std::map<std::string, RoleRecord, std::less<>> roles_;
  std::map<std::pair<std::string, int>, Units, std::less<>> balances_;
  PerDrug<Units> reserve_;
  PerDrug<Units> initial_reserve_;
  std::vector<AuditRecord> chain_;
  Day last_committed_day_ = -1;
};

/// Deterministic per-role key: HMAC(seed, "role-key/" + role_id), 32 bytes.
Bytes derive_role_key(std::uint64_t seed, std::string_view role_id);

}  // namespace medsim::ledger
