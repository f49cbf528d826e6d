#include "medsim/ledger/audit.hpp"

#include <array>
#include <charconv>
#include <ostream>

namespace medsim::ledger {

namespace {

constexpr std::array<std::pair<AuditAction, std::string_view>, 7> kActions{{
    {AuditAction::role_register, "role_register"},
    {AuditAction::snapshot_commit, "snapshot_commit"},
    {AuditAction::snapshot_reject, "snapshot_reject"},
    {AuditAction::allocation_commit, "allocation_commit"},
    {AuditAction::inventory_commit, "inventory_commit"},
    {AuditAction::disruption_commit, "disruption_commit"},
    {AuditAction::reserve_deploy, "reserve_deploy"},
}};

template <typename T>
std::optional<T> parse_decimal(std::string_view s) {
  if (s.empty() || (s.size() > 1 && s[0] == '0')) return std::nullopt;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(AuditAction action) {
  for (const auto& [a, name] : kActions)
    if (a == action) return name;
  return "unknown";
}

std::optional<AuditAction> parse_audit_action(std::string_view text) {
  for (const auto& [a, name] : kActions)
    if (name == text) return a;
  return std::nullopt;
}

bool valid_role_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

std::string canonical_prefix(const AuditRecord& r) {
  std::string out = std::to_string(r.tx_id);
  out += ',';
  out += r.role_id;
  out += ',';
  out += to_string(r.action);
  out += ',';
  out += r.payload_hash.hex();
  out += ',';
  out += std::to_string(r.timestamp);
  out += ',';
  out += r.prev_hash.hex();
  return out;
}

Digest compute_record_hash(const AuditRecord& r) { return sha256(canonical_prefix(r)); }

std::string to_line(const AuditRecord& r) { return canonical_prefix(r) + ',' + r.record_hash.hex(); }

std::optional<AuditRecord> parse_line(std::string_view line) {
  std::array<std::string_view, 7> f;
  std::size_t start = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto comma = line.find(',', start);
    if ((comma == std::string_view::npos) != (i + 1 == f.size())) return std::nullopt;
    f[i] = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    start = comma + 1;
  }
  AuditRecord r;
  const auto tx = parse_decimal<std::uint64_t>(f[0]);
  const auto action = parse_audit_action(f[2]);
  const auto payload = parse_digest(f[3]);
  const auto ts = parse_decimal<Day>(f[4]);
  const auto prev = parse_digest(f[5]);
  const auto self = parse_digest(f[6]);
  if (!tx || !valid_role_id(f[1]) || !action || !payload || !ts || !prev || !self) return std::nullopt;
  r.tx_id = *tx;
  r.role_id = std::string(f[1]);
  r.action = *action;
  r.payload_hash = *payload;
  r.timestamp = *ts;
  r.prev_hash = *prev;
  r.record_hash = *self;
  return r;
}

namespace {

std::optional<ChainVerdict> check_link(const AuditRecord& r, std::size_t i, const Digest& prev) {
  auto bad = [&](std::string reason) { return ChainVerdict{false, i, std::move(reason)}; };
  if (r.tx_id != i) return bad("tx_id out of sequence");
  if (r.prev_hash != prev) return bad("prev_hash does not match the previous record");
  if (compute_record_hash(r) != r.record_hash) return bad("record_hash mismatch");
  return std::nullopt;
}

}  // namespace

ChainVerdict verify_chain(std::span<const AuditRecord> chain) {
  Digest prev = Digest::zero();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (auto v = check_link(chain[i], i, prev)) return *v;
    prev = chain[i].record_hash;
  }
  return {};
}

ChainVerdict verify_chain_text(std::string_view text, std::vector<AuditRecord>* parsed) {
  std::vector<AuditRecord> records;
  Digest prev = Digest::zero();
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const auto index = records.size();
    if (nl == std::string_view::npos) return {false, index, "unterminated line"};
    auto rec = parse_line(text.substr(start, nl - start));
    if (!rec) return {false, index, "malformed record"};
    if (auto v = check_link(*rec, index, prev)) return *v;
    prev = rec->record_hash;
    records.push_back(std::move(*rec));
    start = nl + 1;
  }
  if (parsed) *parsed = std::move(records);
  return {};
}

void write_chain(std::ostream& out, std::span<const AuditRecord> chain) {
  for (const auto& r : chain) out << to_line(r) << '\n';
}

}  // namespace medsim::ledger
