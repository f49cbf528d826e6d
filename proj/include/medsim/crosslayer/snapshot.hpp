#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "medsim/coordination/round.hpp"
#include "medsim/core/digest.hpp"
#include "medsim/ledger/ledger.hpp"
#include "medsim/ledger/store.hpp"

namespace medsim::crosslayer {

inline constexpr int kSnapshotVersion = 1;

struct AllocationEntry {
  int region = 0;
  int drug = 0;
  Units quantity = 0;
  Units demand = 0;           // aggregate demand the allocation answered
  std::int64_t phi_ppb = 0;   // fairness weight in parts per billion

  friend bool operator==(const AllocationEntry&, const AllocationEntry&) = default;
};

struct InventoryEntry {
  std::string agent_id;
  int drug = 0;
  Units quantity = 0;

  friend bool operator==(const InventoryEntry&, const InventoryEntry&) = default;
};

struct ProductionEntry {
  int drug = 0;
  Units quantity = 0;

  friend bool operator==(const ProductionEntry&, const ProductionEntry&) = default;
};

/// Σ^t without its addresses: (day, A^t, I^t, D^t) plus declared production.
struct SnapshotContent {
  Day day = 0;
  std::vector<AllocationEntry> allocations;
  std::vector<InventoryEntry> inventories;
  std::vector<ledger::DisruptionReport> disruptions;
  std::vector<ProductionEntry> production;

  friend bool operator==(const SnapshotContent&, const SnapshotContent&) = default;
};

struct Snapshot {
  SnapshotContent content;
  std::string bytes;  // canonical serialization
  std::string cid;    // hex of integrity_hash; both address the same bytes
  Digest integrity_hash;
};

class SnapshotFormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Canonical JSON: keys sorted, no whitespace, integers only, entries sorted by
/// their identifying fields. Insertion order never affects the bytes. Throws
/// SnapshotFormatError on duplicate entries or negative quantities.
std::string canonical_serialize(const SnapshotContent& content);

/// Strict inverse: anything that would not re-serialize to the same bytes is
/// rejected with SnapshotFormatError.
SnapshotContent parse_snapshot(std::string_view bytes);

/// φ as an integer, for canonical bytes. Throws SnapshotFormatError if not finite.
std::int64_t phi_to_ppb(double phi);

/// Snapshot of a finished round: allocations from the outcome, closing
/// inventories from the state after apply_outcome.
SnapshotContent snapshot_content(const coordination::RoundOutcome& outcome,
                                 const coordination::WorldState& after);

/// Serializes, stores and addresses the content.
Snapshot build_snapshot(const SnapshotContent& content, ledger::ContentStore& store);

Digest snapshot_mac(const Bytes& key, std::string_view bytes);

/// Ledger-side contract parameters.
struct ContractParams {
  double epsilon = 0.0;
  int num_regions = 0;
  int num_drugs = 0;
  std::string manufacturer_id = "manufacturer_0";
};

struct RegionDeployment {
  std::string agent_id;                       // reporting agent
  PerDrug<Units> total;
  std::vector<PerDrug<Units>> by_region;      // [region][drug]
};

struct SubmissionReceipt {
  Day day = 0;
  std::optional<std::uint64_t> tx_id;  // snapshot_commit or snapshot_reject record
  Digest integrity_hash;
  bool accepted = false;
  ledger::Reject reason = ledger::Reject::none;
  std::string detail;
  std::vector<RegionDeployment> deployments;
};

/// The ledger re-derives everything from the stored bytes, checks the MAC and
/// the allocation rules, then atomically commits inventories, processes the
/// disruptions and appends snapshot_commit, allocation_commit and
/// inventory_commit. A rejection appends one snapshot_reject record (when the
/// submitter is registered) and changes nothing else.
SubmissionReceipt submit_snapshot(ledger::Ledger& ledger, const ledger::ContentStore& store,
                                  const ContractParams& params, std::string_view cid,
                                  const Digest& integrity_hash, std::string_view submitter,
                                  const Digest& mac);

struct AuditFinding {
  bool ok = true;
  std::size_t index = 0;  // audit record index of the first failure
  std::string reason;
};

/// Re-fetches the receipt's content through the audit trail and re-hashes it.
AuditFinding verify_snapshot(const SubmissionReceipt& receipt,
                             std::span<const ledger::AuditRecord> chain,
                             const ledger::ContentStore& store);

/// Third-party sweep over exported artifacts: chain text, every referenced
/// store object, and optionally the published head hash.
AuditFinding verify_audit(std::string_view chain_text, const ledger::ContentStore& store,
                          std::optional<Digest> expected_head = std::nullopt);

/// `day,tx_id,hash,verdict` rows.
void write_receipt_row(std::ostream& out, const SubmissionReceipt& receipt);
inline constexpr const char* kReceiptHeader = "day,tx_id,hash,verdict";

}  // namespace medsim::crosslayer
