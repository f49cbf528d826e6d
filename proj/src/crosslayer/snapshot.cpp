#include "medsim/crosslayer/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "medsim/core/apportion.hpp"

namespace medsim::crosslayer {

using ledger::Reject;
using nlohmann::json;

namespace {

void sort_content(SnapshotContent& c) {
  std::sort(c.allocations.begin(), c.allocations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.region, a.drug) < std::tie(b.region, b.drug);
  });
  std::sort(c.inventories.begin(), c.inventories.end(), [](const auto& a, const auto& b) {
    return std::tie(a.agent_id, a.drug) < std::tie(b.agent_id, b.drug);
  });
  std::sort(c.disruptions.begin(), c.disruptions.end(), [](const auto& a, const auto& b) {
    return std::make_pair(a.agent_id, to_string(a.event_type)) <
           std::make_pair(b.agent_id, to_string(b.event_type));
  });
  std::sort(c.production.begin(), c.production.end(),
            [](const auto& a, const auto& b) { return a.drug < b.drug; });
}

void check_content(const SnapshotContent& c) {
  auto fail = [](const std::string& what) { throw SnapshotFormatError("snapshot: " + what); };
  if (c.day < 0) fail("negative day");
  std::set<std::pair<int, int>> alloc_keys;
  for (const auto& a : c.allocations) {
    if (a.region < 0 || a.drug < 0 || a.quantity < 0 || a.demand < 0 || a.phi_ppb < 0)
      fail("negative allocation field");
    if (!alloc_keys.insert({a.region, a.drug}).second) fail("duplicate allocation entry");
  }
  std::set<std::pair<std::string, int>> inv_keys;
  for (const auto& i : c.inventories) {
    if (!ledger::valid_role_id(i.agent_id)) fail("bad agent id in inventories");
    if (i.drug < 0 || i.quantity < 0) fail("negative inventory field");
    if (!inv_keys.insert({i.agent_id, i.drug}).second) fail("duplicate inventory entry");
  }
  std::set<std::pair<std::string, int>> dis_keys;
  for (const auto& d : c.disruptions) {
    if (!ledger::valid_role_id(d.agent_id)) fail("bad agent id in disruptions");
    if (d.timestamp != c.day) fail("disruption timestamp differs from the snapshot day");
    if (!dis_keys.insert({d.agent_id, static_cast<int>(d.event_type)}).second) fail("duplicate disruption");
  }
  std::set<int> prod_keys;
  for (const auto& p : c.production) {
    if (p.drug < 0 || p.quantity < 0) fail("negative production field");
    if (!prod_keys.insert(p.drug).second) fail("duplicate production entry");
  }
}

// Field access for the strict parser: the object must have exactly `keys`.
void expect_keys(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object() || j.size() != keys.size())
    throw SnapshotFormatError(std::string("snapshot: malformed ") + what);
  for (const char* k : keys)
    if (!j.contains(k)) throw SnapshotFormatError(std::string("snapshot: ") + what + " lacks " + k);
}

std::int64_t get_int(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw SnapshotFormatError(std::string("snapshot: ") + key + " must be an integer");
  return v.get<std::int64_t>();
}

std::string get_str(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw SnapshotFormatError(std::string("snapshot: ") + key + " must be a string");
  return v.get<std::string>();
}

const json& get_array(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw SnapshotFormatError(std::string("snapshot: ") + key + " must be an array");
  return v;
}

int narrow(std::int64_t v) {
  if (v < -2147483647 || v > 2147483647) throw SnapshotFormatError("snapshot: index out of range");
  return static_cast<int>(v);
}

}  // namespace

std::int64_t phi_to_ppb(double phi) {
  if (!std::isfinite(phi) || phi < 0.0) throw SnapshotFormatError("snapshot: fairness weight not finite");
  return std::llround(phi * 1e9);
}

std::string canonical_serialize(const SnapshotContent& content) {
  SnapshotContent c = content;
  sort_content(c);
  check_content(c);
  json j = json::object();
  j["version"] = kSnapshotVersion;
  j["day"] = c.day;
  j["allocations"] = json::array();
  for (const auto& a : c.allocations)
    j["allocations"].push_back({{"region", a.region}, {"drug", a.drug}, {"quantity", a.quantity},
                                {"demand", a.demand}, {"phi_ppb", a.phi_ppb}});
  j["inventories"] = json::array();
  for (const auto& i : c.inventories)
    j["inventories"].push_back({{"agent_id", i.agent_id}, {"drug", i.drug}, {"quantity", i.quantity}});
  j["disruptions"] = json::array();
  for (const auto& d : c.disruptions)
    j["disruptions"].push_back({{"agent_id", d.agent_id},
                                {"event_type", std::string(to_string(d.event_type))},
                                {"timestamp", d.timestamp}});
  j["production"] = json::array();
  for (const auto& p : c.production) j["production"].push_back({{"drug", p.drug}, {"quantity", p.quantity}});
  return j.dump();
}

SnapshotContent parse_snapshot(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw SnapshotFormatError(std::string("snapshot: not JSON: ") + e.what());
  }
  expect_keys(j, {"allocations", "day", "disruptions", "inventories", "production", "version"}, "snapshot");
  if (get_int(j, "version") != kSnapshotVersion) throw SnapshotFormatError("snapshot: unsupported version");

  SnapshotContent c;
  c.day = narrow(get_int(j, "day"));
  for (const auto& a : get_array(j, "allocations")) {
    expect_keys(a, {"demand", "drug", "phi_ppb", "quantity", "region"}, "allocation");
    c.allocations.push_back({narrow(get_int(a, "region")), narrow(get_int(a, "drug")), get_int(a, "quantity"),
                             get_int(a, "demand"), get_int(a, "phi_ppb")});
  }
  for (const auto& i : get_array(j, "inventories")) {
    expect_keys(i, {"agent_id", "drug", "quantity"}, "inventory");
    c.inventories.push_back({get_str(i, "agent_id"), narrow(get_int(i, "drug")), get_int(i, "quantity")});
  }
  for (const auto& d : get_array(j, "disruptions")) {
    expect_keys(d, {"agent_id", "event_type", "timestamp"}, "disruption");
    const auto type = ledger::parse_disruption_type(get_str(d, "event_type"));
    if (!type) throw SnapshotFormatError("snapshot: unknown event_type");
    c.disruptions.push_back({get_str(d, "agent_id"), *type, narrow(get_int(d, "timestamp"))});
  }
  for (const auto& p : get_array(j, "production")) {
    expect_keys(p, {"drug", "quantity"}, "production");
    c.production.push_back({narrow(get_int(p, "drug")), get_int(p, "quantity")});
  }
  if (canonical_serialize(c) != bytes) throw SnapshotFormatError("snapshot: bytes are not canonical");
  return c;
}

SnapshotContent snapshot_content(const coordination::RoundOutcome& o, const coordination::WorldState& after) {
  SnapshotContent c;
  c.day = o.day;
  for (std::size_t r = 0; r < o.allocations.size(); ++r) {
    const auto& a = o.allocations[r];
    const coordination::AggregateDemandMsg* agg = nullptr;
    for (const auto& m : o.aggregates)
      if (m.region == a.region) agg = &m;
    for (std::size_t d = 0; d < a.quantity.size(); ++d)
      c.allocations.push_back({a.region, static_cast<int>(d), a.quantity[d], agg ? agg->total[d] : 0,
                               phi_to_ppb(a.fairness)});
  }
  auto add_inventory = [&](const std::string& id, const PerDrug<Units>& stock) {
    for (std::size_t d = 0; d < stock.size(); ++d) c.inventories.push_back({id, static_cast<int>(d), stock[d]});
  };
  add_inventory(o.manufacturer.name(), after.manufacturer_stock);
  for (std::size_t j = 0; j < after.distributor_stock.size(); ++j)
    add_inventory("distributor_" + std::to_string(j), after.distributor_stock[j]);
  for (std::size_t k = 0; k < after.hospital_stock.size(); ++k)
    add_inventory("hospital_" + std::to_string(k), after.hospital_stock[k]);
  for (const auto& a : o.disrupted)
    c.disruptions.push_back({a.name(),
                             a.cls == AgentClass::manufacturer ? ledger::DisruptionType::supply_halt
                                                               : ledger::DisruptionType::transit_delay,
                             o.day});
  for (std::size_t d = 0; d < o.production.size(); ++d)
    c.production.push_back({static_cast<int>(d), o.production[d]});
  return c;
}

Snapshot build_snapshot(const SnapshotContent& content, ledger::ContentStore& store) {
  Snapshot s;
  s.bytes = canonical_serialize(content);
  s.content = parse_snapshot(s.bytes);
  s.integrity_hash = sha256(s.bytes);
  s.cid = store.store(s.bytes);
  return s;
}

Digest snapshot_mac(const Bytes& key, std::string_view bytes) { return hmac_sha256(key, as_bytes(bytes)); }

SubmissionReceipt submit_snapshot(ledger::Ledger& ledger, const ledger::ContentStore& store,
                                  const ContractParams& params, std::string_view cid,
                                  const Digest& integrity_hash, std::string_view submitter,
                                  const Digest& mac) {
  SubmissionReceipt receipt;
  receipt.integrity_hash = integrity_hash;
  receipt.day = ledger.last_committed_day() + 1;

  const auto* role = ledger.role(submitter);
  if (!role) {
    receipt.reason = Reject::unknown_role;
    receipt.detail = std::string(submitter);
    return receipt;
  }
  auto reject = [&](Reject code, std::string detail) {
    receipt.accepted = false;
    receipt.reason = code;
    receipt.detail = std::move(detail);
    receipt.deployments.clear();
    receipt.tx_id = ledger.append_audit(ledger::AuditAction::snapshot_reject, submitter, integrity_hash,
                                        std::max(receipt.day, 0))
                        .tx_id;
    return receipt;
  };

  std::string bytes;
  try {
    bytes = store.fetch(cid);
  } catch (const ledger::StoreError& e) {
    return reject(e.kind() == ledger::StoreError::Kind::corrupted ? Reject::hash_mismatch : Reject::missing_content,
                  e.what());
  }
  if (sha256(bytes) != integrity_hash || integrity_hash.hex() != cid)
    return reject(Reject::hash_mismatch, "stored bytes do not hash to the declared integrity hash");
  if (snapshot_mac(role->auth_key, bytes) != mac) return reject(Reject::bad_mac, "authentication tag mismatch");
  if (role->cls != AgentClass::manufacturer || submitter != params.manufacturer_id)
    return reject(Reject::unauthorized, "only the manufacturer submits snapshots");

  SnapshotContent c;
  try {
    c = parse_snapshot(bytes);
  } catch (const SnapshotFormatError& e) {
    return reject(Reject::malformed_snapshot, e.what());
  }
  receipt.day = c.day;
  if (c.day <= ledger.last_committed_day())
    return reject(Reject::stale_timestamp, "day " + std::to_string(c.day) + " is already committed");

  const auto regions = static_cast<std::size_t>(params.num_regions);
  const auto drugs = static_cast<std::size_t>(params.num_drugs);
  if (c.allocations.size() != regions * drugs || c.production.size() != drugs)
    return reject(Reject::malformed_snapshot, "allocations must cover every region and drug");
  for (const auto& a : c.allocations)
    if (a.region >= params.num_regions || a.drug >= params.num_drugs)
      return reject(Reject::malformed_snapshot, "allocation index out of range");
  for (const auto& p : c.production)
    if (p.drug >= params.num_drugs) return reject(Reject::malformed_snapshot, "production index out of range");

  bool halted = false;
  for (const auto& d : c.disruptions) {
    if (!ledger.role(d.agent_id)) return reject(Reject::unknown_role, "disruption from " + d.agent_id);
    if (d.agent_id == params.manufacturer_id && d.event_type == ledger::DisruptionType::supply_halt) halted = true;
  }

  // Allocations and production arrive sorted by (region, drug) and drug.
  std::vector<Units> shortfall_total(drugs, 0);
  std::vector<std::vector<double>> shortfall_weight(drugs, std::vector<double>(regions, 0.0));
  for (std::size_t d = 0; d < drugs; ++d) {
    std::vector<Units> x(regions), demand(regions);
    std::vector<double> phi(regions);
    for (std::size_t r = 0; r < regions; ++r) {
      const auto& a = c.allocations[r * drugs + d];
      x[r] = a.quantity;
      demand[r] = a.demand;
      phi[r] = static_cast<double>(a.phi_ppb) / 1e9;
      const Units gap = std::max<Units>(0, a.demand - a.quantity);
      shortfall_total[d] += gap;
      shortfall_weight[d][r] = static_cast<double>(gap);
    }
    const Units opening = ledger.balance(params.manufacturer_id, static_cast<int>(d));
    const Units production = c.production[d].quantity;
    const Units q = halted ? 0 : opening + production;
    const auto verdict = ledger::validate_allocation(x, q, params.epsilon, phi, demand);
    if (!verdict.ok()) return reject(verdict.reason, "drug " + std::to_string(d) + ": " + verdict.detail);

    Units allocated = 0;
    for (Units v : x) allocated += v;
    Units closing = -1;
    for (const auto& i : c.inventories)
      if (i.agent_id == params.manufacturer_id && i.drug == static_cast<int>(d)) closing = i.quantity;
    if (closing != opening + production - allocated)
      return reject(Reject::inventory_mismatch,
                    "drug " + std::to_string(d) + ": manufacturer closes at " + std::to_string(closing) +
                        ", expected " + std::to_string(opening + production - allocated));
  }

  // Everything below runs on a copy and replaces the ledger only on success.
  ledger::Ledger next = ledger;
  std::vector<ledger::InventoryDelta> deltas;
  for (const auto& i : c.inventories)
    deltas.push_back({i.agent_id, i.drug, i.quantity - next.balance(i.agent_id, i.drug)});

  const auto& commit = next.append_audit(ledger::AuditAction::snapshot_commit, submitter, integrity_hash, c.day);
  receipt.tx_id = commit.tx_id;
  std::string alloc_payload;
  for (const auto& a : c.allocations)
    alloc_payload += std::to_string(a.region) + "," + std::to_string(a.drug) + "," + std::to_string(a.quantity) + "\n";
  next.append_audit(ledger::AuditAction::allocation_commit, submitter, sha256(alloc_payload), c.day);
  const auto inv = next.commit_inventory(submitter, deltas, c.day);
  if (!inv.accepted) return reject(inv.reason, inv.detail);

  for (const auto& d : c.disruptions) {
    const bool supply = d.event_type == ledger::DisruptionType::supply_halt && d.agent_id == params.manufacturer_id;
    const std::vector<Units> shortfall = supply ? shortfall_total : std::vector<Units>(drugs, 0);
    auto out = next.report_disruption(d, shortfall);
    if (!out.report.accepted) return reject(out.report.reason, out.report.detail);
    RegionDeployment dep{d.agent_id, out.deployed, std::vector<PerDrug<Units>>(regions, PerDrug<Units>(drugs, 0))};
    for (std::size_t k = 0; k < drugs; ++k) {
      const auto split = largest_remainder(shortfall_weight[k], out.deployed[k]);
      for (std::size_t r = 0; r < regions; ++r) dep.by_region[r][k] = split[r];
    }
    receipt.deployments.push_back(std::move(dep));
  }
  next.close_day(c.day);
  ledger = std::move(next);
  receipt.accepted = true;
  receipt.reason = Reject::none;
  return receipt;
}

AuditFinding verify_snapshot(const SubmissionReceipt& receipt, std::span<const ledger::AuditRecord> chain,
                             const ledger::ContentStore& store) {
  if (!receipt.tx_id || *receipt.tx_id >= chain.size()) return {false, chain.size(), "receipt has no audit record"};
  const auto index = static_cast<std::size_t>(*receipt.tx_id);
  const auto& rec = chain[index];
  if (rec.action != ledger::AuditAction::snapshot_commit && rec.action != ledger::AuditAction::snapshot_reject)
    return {false, index, "record is not a snapshot record"};
  if (rec.payload_hash != receipt.integrity_hash) return {false, index, "payload hash differs from the receipt"};
  try {
    const auto bytes = store.fetch(rec.payload_hash.hex());
    if (rec.action == ledger::AuditAction::snapshot_commit && parse_snapshot(bytes).day != rec.timestamp)
      return {false, index, "snapshot day differs from the record timestamp"};
  } catch (const ledger::StoreError& e) {
    return {false, index, e.kind() == ledger::StoreError::Kind::not_found ? "missing-content" : "hash-mismatch"};
  } catch (const SnapshotFormatError& e) {
    return {false, index, e.what()};
  }
  return {};
}

AuditFinding verify_audit(std::string_view chain_text, const ledger::ContentStore& store,
                          std::optional<Digest> expected_head) {
  std::vector<ledger::AuditRecord> chain;
  const auto v = ledger::verify_chain_text(chain_text, &chain);
  if (!v.ok) return {false, v.first_bad, v.reason};
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto& r = chain[i];
    if (r.action != ledger::AuditAction::snapshot_commit && r.action != ledger::AuditAction::snapshot_reject)
      continue;
    SubmissionReceipt receipt;
    receipt.tx_id = r.tx_id;
    receipt.integrity_hash = r.payload_hash;
    if (auto f = verify_snapshot(receipt, chain, store); !f.ok) return f;
  }
  if (expected_head) {
    const Digest head = chain.empty() ? Digest::zero() : chain.back().record_hash;
    if (head != *expected_head) return {false, chain.size(), "head hash differs from the published head"};
  }
  return {};
}

void write_receipt_row(std::ostream& out, const SubmissionReceipt& r) {
  out << r.day << ',' << (r.tx_id ? std::to_string(*r.tx_id) : std::string()) << ','
      << r.integrity_hash.hex() << ',' << (r.accepted ? "accepted" : "rejected:" + std::string(to_string(r.reason)))
      << '\n';
}

}  // namespace medsim::crosslayer
