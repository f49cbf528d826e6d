#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medsim/core/digest.hpp"
#include "medsim/core/types.hpp"

namespace medsim::ledger {

enum class AuditAction {
  role_register,
  snapshot_commit,
  snapshot_reject,
  allocation_commit,
  inventory_commit,
  disruption_commit,
  reserve_deploy,
};

std::string_view to_string(AuditAction action);
std::optional<AuditAction> parse_audit_action(std::string_view text);

struct AuditRecord {
  std::uint64_t tx_id = 0;
  std::string role_id;
  AuditAction action = AuditAction::role_register;
  Digest payload_hash;
  Day timestamp = 0;
  Digest prev_hash;
  Digest record_hash;

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

/// `tx_id,role_id,action,payload_hash,timestamp,prev_hash`: the bytes that
/// record_hash commits to.
std::string canonical_prefix(const AuditRecord& record);
Digest compute_record_hash(const AuditRecord& record);

/// Export line (no trailing newline): canonical prefix plus `,record_hash`.
std::string to_line(const AuditRecord& record);

/// Strict inverse of to_line: decimal fields without leading zeros or signs,
/// lowercase 64-digit hashes, nothing else on the line.
std::optional<AuditRecord> parse_line(std::string_view line);

/// Role ids are [a-z0-9_]{1,64} so export lines never need escaping.
bool valid_role_id(std::string_view id);

struct ChainVerdict {
  bool ok = true;
  std::size_t first_bad = 0;  // meaningful only when !ok
  std::string reason;
};

/// Recomputes every record hash and link. A truncated tail still verifies;
/// only a published head hash exposes truncation.
ChainVerdict verify_chain(std::span<const AuditRecord> chain);

/// Verifies exported chain text. Each record must sit on its own line ending
/// in '\n'; an unparsable line is reported at its own index.
ChainVerdict verify_chain_text(std::string_view text, std::vector<AuditRecord>* parsed = nullptr);

void write_chain(std::ostream& out, std::span<const AuditRecord> chain);

}  // namespace medsim::ledger
