#include "medsim/ledger/ledger.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

#include "medsim/core/apportion.hpp"

namespace medsim::ledger {

std::string_view to_string(Reject code) {
  switch (code) {
    case Reject::none: return "none";
    case Reject::budget: return "budget";
    case Reject::min_support: return "min_support";
    case Reject::severity: return "severity";
    case Reject::duplicate_role: return "duplicate_role";
    case Reject::malformed_role: return "malformed_role";
    case Reject::unknown_role: return "unknown_role";
    case Reject::unauthorized: return "unauthorized";
    case Reject::stale_timestamp: return "stale_timestamp";
    case Reject::negative_balance: return "negative_balance";
    case Reject::hash_mismatch: return "hash_mismatch";
    case Reject::bad_mac: return "bad_mac";
    case Reject::missing_content: return "missing_content";
    case Reject::malformed_snapshot: return "malformed_snapshot";
    case Reject::inventory_mismatch: return "inventory_mismatch";
  }
  return "unknown";
}

std::string_view to_string(DisruptionType type) {
  return type == DisruptionType::supply_halt ? "supply_halt" : "transit_delay";
}

std::optional<DisruptionType> parse_disruption_type(std::string_view text) {
  if (text == "supply_halt") return DisruptionType::supply_halt;
  if (text == "transit_delay") return DisruptionType::transit_delay;
  return std::nullopt;
}

Verdict validate_allocation(std::span<const Units> alloc, Units available, double epsilon,
                            std::span<const double> phi, std::span<const Units> demand) {
  const std::size_t n = alloc.size();
  if (phi.size() != n || demand.size() != n)
    return {Reject::malformed_snapshot, "allocation, fairness and demand lengths differ"};
  Units sum = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (alloc[r] < 0) return {Reject::budget, "negative allocation in region " + std::to_string(r)};
    sum += alloc[r];
  }
  if (sum > available)
    return {Reject::budget, "allocated " + std::to_string(sum) + " of " + std::to_string(available)};

  const Units floor_units = min_support_floor(epsilon, available);
  for (std::size_t r = 0; r < n; ++r) {
    if (demand[r] <= 0) continue;
    const Units need = std::min(floor_units, demand[r]);
    if (alloc[r] < need)
      return {Reject::min_support, "region " + std::to_string(r) + " got " + std::to_string(alloc[r]) +
                                       ", floor " + std::to_string(need)};
  }

  for (std::size_t r = 0; r < n; ++r) {
    if (alloc[r] >= demand[r]) continue;
    for (std::size_t s = 0; s < n; ++s) {
      if (s == r || phi[r] < phi[s]) continue;
      if (alloc[r] < alloc[s] - 1)
        return {Reject::severity, "region " + std::to_string(r) + " outranks region " +
                                      std::to_string(s) + " but got " + std::to_string(alloc[r]) +
                                      " < " + std::to_string(alloc[s])};
    }
  }
  return {};
}

Ledger::Ledger(PerDrug<Units> reserve) : reserve_(reserve), initial_reserve_(std::move(reserve)) {
  for (Units u : reserve_)
    if (u < 0) throw std::invalid_argument("Ledger: negative reserve");
}

TxReceipt Ledger::register_role(const RoleRecord& record, Day day) {
  if (!valid_role_id(record.role_id))
    return {false, std::nullopt, Reject::malformed_role, "role id must match [a-z0-9_]{1,64}"};
  if (record.auth_key.size() < kMinKeyBytes || record.auth_key.size() > kMaxKeyBytes)
    return {false, std::nullopt, Reject::malformed_role, "auth key must be 16 to 64 bytes"};
  if (roles_.count(record.role_id))
    return {false, std::nullopt, Reject::duplicate_role, record.role_id + " already registered"};
  roles_.emplace(record.role_id, record);
  // The key itself stays off the log; only its digest is committed.
  const std::string payload = record.role_id + "," + std::string(to_string(record.cls)) + "," +
                              sha256(record.auth_key).hex();
  const auto& rec = append_audit(AuditAction::role_register, record.role_id, sha256(payload), day);
  return {true, rec.tx_id, Reject::none, {}};
}

const RoleRecord* Ledger::role(std::string_view role_id) const {
  const auto it = roles_.find(role_id);
  return it == roles_.end() ? nullptr : &it->second;
}

const AuditRecord& Ledger::append_audit(AuditAction action, std::string_view role_id,
                                        const Digest& payload_hash, Day day) {
  if (!role(role_id)) throw std::invalid_argument("append_audit: unknown role " + std::string(role_id));
  AuditRecord r;
  r.tx_id = chain_.size();
  r.role_id = std::string(role_id);
  r.action = action;
  r.payload_hash = payload_hash;
  r.timestamp = day;
  r.prev_hash = head();
  r.record_hash = compute_record_hash(r);
  chain_.push_back(std::move(r));
  return chain_.back();
}

TxReceipt Ledger::commit_inventory(std::string_view submitter, std::span<const InventoryDelta> batch,
                                   Day day) {
  if (!role(submitter)) return {false, std::nullopt, Reject::unknown_role, std::string(submitter)};
  auto next = balances_;
  std::string payload;
  for (const auto& d : batch) {
    if (!role(d.agent_id)) return {false, std::nullopt, Reject::unknown_role, d.agent_id};
    if (d.drug < 0) return {false, std::nullopt, Reject::malformed_snapshot, "negative drug index"};
    auto& bal = next[{d.agent_id, d.drug}];
    bal += d.delta;
    if (bal < 0)
      return {false, std::nullopt, Reject::negative_balance,
              d.agent_id + " drug " + std::to_string(d.drug) + " would reach " + std::to_string(bal)};
    payload += d.agent_id + "," + std::to_string(d.drug) + "," + std::to_string(d.delta) + "\n";
  }
  balances_ = std::move(next);
  const auto& rec = append_audit(AuditAction::inventory_commit, submitter, sha256(payload), day);
  return {true, rec.tx_id, Reject::none, {}};
}

Units Ledger::balance(std::string_view agent_id, int drug) const {
  const auto it = balances_.find(std::pair<std::string, int>{std::string(agent_id), drug});
  return it == balances_.end() ? 0 : it->second;
}

ReserveOutcome Ledger::report_disruption(const DisruptionReport& report,
                                         std::span<const Units> shortfall) {
  ReserveOutcome out;
  out.deployed.assign(reserve_.size(), 0);
  auto reject = [&](Reject code, std::string detail) {
    out.report = {false, std::nullopt, code, detail};
    out.deploy = out.report;
    return out;
  };
  if (!role(report.agent_id)) return reject(Reject::unknown_role, report.agent_id);
  if (report.timestamp <= last_committed_day_)
    return reject(Reject::stale_timestamp, "day " + std::to_string(report.timestamp) + " is closed");
  if (shortfall.size() != reserve_.size())
    return reject(Reject::malformed_snapshot, "shortfall must list every drug");

  for (std::size_t d = 0; d < reserve_.size(); ++d) {
    out.deployed[d] = std::clamp<Units>(shortfall[d], 0, reserve_[d]);
    reserve_[d] -= out.deployed[d];
  }
  const std::string report_payload = report.agent_id + "," + std::string(to_string(report.event_type)) +
                                     "," + std::to_string(report.timestamp);
  std::string deploy_payload = report_payload;
  for (Units u : out.deployed) deploy_payload += "," + std::to_string(u);
  const auto& r1 = append_audit(AuditAction::disruption_commit, report.agent_id,
                                sha256(report_payload), report.timestamp);
  out.report = {true, r1.tx_id, Reject::none, {}};
  const auto& r2 = append_audit(AuditAction::reserve_deploy, report.agent_id, sha256(deploy_payload),
                                report.timestamp);
  out.deploy = {true, r2.tx_id, Reject::none, {}};
  return out;
}

void Ledger::close_day(Day day) {
  if (day <= last_committed_day_)
    throw std::invalid_argument("close_day: day " + std::to_string(day) + " already closed");
  last_committed_day_ = day;
}

std::string Ledger::state_text() const {
  std::string out = "roles\n";
  for (const auto& [id, r] : roles_)
    out += id + "," + std::string(to_string(r.cls)) + "," + to_hex(r.auth_key) + "\n";
  out += "balances\n";
  for (const auto& [key, v] : balances_)
    out += key.first + "," + std::to_string(key.second) + "," + std::to_string(v) + "\n";
  out += "reserve";
  for (Units u : reserve_) out += "," + std::to_string(u);
  out += "\nlast_day," + std::to_string(last_committed_day_) + "\nchain\n";
  for (const auto& r : chain_) out += to_line(r) + "\n";
  return out;
}

Bytes derive_role_key(std::uint64_t seed, std::string_view role_id) {
  std::array<std::uint8_t, 8> key{};
  for (int i = 0; i < 8; ++i) key[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seed >> (8 * i));
  const auto tag = hmac_sha256(key, as_bytes("role-key/" + std::string(role_id)));
  return Bytes(tag.bytes.begin(), tag.bytes.end());
}

}  // namespace medsim::ledger
