#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "medsim/crosslayer/snapshot.hpp"

using namespace medsim;
using namespace medsim::crosslayer;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("medsim_crosslayer_test_" + name);
  fs::remove_all(dir);
  return dir;
}

SnapshotContent sample_content() {
  SnapshotContent c;
  c.day = 4;
  c.allocations = {{0, 0, 300, 400, 500000000}, {1, 0, 200, 200, 300000000}, {0, 1, 7, 9, 500000000}};
  c.inventories = {{"hospital_0", 0, 12}, {"distributor_1", 1, 0}, {"manufacturer_0", 0, 90}};
  c.disruptions = {{"distributor_1", ledger::DisruptionType::transit_delay, 4},
                   {"manufacturer_0", ledger::DisruptionType::supply_halt, 4}};
  c.production = {{1, 50}, {0, 100}};
  return c;
}

// A seeded run wired through the ledger, the way the runner does it.
struct Pipeline {
  scenario::ScenarioConfig cfg;
  scenario::Timeline timeline;
  coordination::Topology topo;
  coordination::WorldState world;
  ledger::Ledger ledger;
  ledger::ContentStore store;
  ContractParams params;
  agents::BuiltinPolicy builtin;
  std::vector<SubmissionReceipt> receipts;
  std::vector<Snapshot> snapshots;

  Pipeline(scenario::ScenarioConfig c, const fs::path& dir)
      : cfg(std::move(c)),
        timeline(scenario::generate_scenario(cfg)),
        topo(coordination::build_topology(cfg)),
        world(coordination::initial_world(cfg, topo)),
        ledger(cfg.reserve_stock),
        store(dir),
        params{cfg.epsilon, cfg.num_regions, cfg.num_drugs, "manufacturer_0"} {
    for (const auto& n : topo.nodes)
      REQUIRE(ledger.register_role({n.name(), n.cls, ledger::derive_role_key(cfg.seed, n.name())}).accepted);
    std::vector<ledger::InventoryDelta> initial;
    for (const auto& n : topo.nodes) {
      const auto& stock = world.stock_of(n);
      for (std::size_t d = 0; d < stock.size(); ++d) initial.push_back({n.name(), static_cast<int>(d), stock[d]});
    }
    REQUIRE(ledger.commit_inventory("manufacturer_0", initial, 0).accepted);
  }

  Digest mac(const Snapshot& s) const { return snapshot_mac(ledger.role("manufacturer_0")->auth_key, s.bytes); }

  // Runs day `world.day` up to the snapshot, without submitting.
  std::pair<coordination::RoundOutcome, coordination::WorldState> round() {
    coordination::PolicyTable table{&builtin, &builtin, &builtin};
    auto outcome = coordination::run_round(timeline, topo, world, table);
    auto after = coordination::apply_outcome(world, outcome);
    return {std::move(outcome), std::move(after)};
  }

  void step() {
    auto [outcome, after] = round();
    auto snap = build_snapshot(snapshot_content(outcome, after), store);
    auto receipt = submit_snapshot(ledger, store, params, snap.cid, snap.integrity_hash, "manufacturer_0", mac(snap));
    REQUIRE_MESSAGE(receipt.accepted, receipt.detail);
    world = std::move(after);
    for (const auto& dep : receipt.deployments)
      coordination::apply_deployments(world, outcome.day, cfg.lead_time_days,
                                      topo.of_class(AgentClass::distributor), dep.by_region);
    receipts.push_back(std::move(receipt));
    snapshots.push_back(std::move(snap));
  }
};

}  // namespace

TEST_CASE("canonical serialization is deterministic and order-free") {
  const auto c = sample_content();
  const auto bytes = canonical_serialize(c);
  CHECK(bytes == canonical_serialize(c));
  CHECK(bytes.find(' ') == std::string::npos);
  CHECK(bytes.rfind("{\"allocations\":[{\"demand\":400,\"drug\":0,\"phi_ppb\":500000000,\"quantity\":300,\"region\":0}", 0) == 0);

  auto permuted = c;
  std::reverse(permuted.allocations.begin(), permuted.allocations.end());
  std::reverse(permuted.inventories.begin(), permuted.inventories.end());
  std::reverse(permuted.disruptions.begin(), permuted.disruptions.end());
  CHECK(canonical_serialize(permuted) == bytes);

  SnapshotContent empty;
  CHECK(canonical_serialize(empty) == canonical_serialize(empty));
  CHECK(canonical_serialize(empty) ==
        R"({"allocations":[],"day":0,"disruptions":[],"inventories":[],"production":[],"version":1})");
}

TEST_CASE("canonical serialization rejects bad content") {
  auto dup = sample_content();
  dup.allocations.push_back(dup.allocations.front());
  CHECK_THROWS_AS(canonical_serialize(dup), SnapshotFormatError);
  auto neg = sample_content();
  neg.inventories[0].quantity = -1;
  CHECK_THROWS_AS(canonical_serialize(neg), SnapshotFormatError);
  auto late = sample_content();
  late.disruptions[0].timestamp = 3;
  CHECK_THROWS_AS(canonical_serialize(late), SnapshotFormatError);
  CHECK_THROWS_AS(phi_to_ppb(NAN), SnapshotFormatError);
}

TEST_CASE("parse is strict") {
  const auto bytes = canonical_serialize(sample_content());
  CHECK(parse_snapshot(bytes) == parse_snapshot(canonical_serialize(parse_snapshot(bytes))));
  CHECK_THROWS_AS(parse_snapshot(bytes + " "), SnapshotFormatError);
  CHECK_THROWS_AS(parse_snapshot(" " + bytes), SnapshotFormatError);
  auto with_float = bytes;
  with_float.replace(with_float.find("\"quantity\":300"), 14, "\"quantity\":300.0");
  CHECK_THROWS_AS(parse_snapshot(with_float), SnapshotFormatError);
  auto extra = bytes;
  extra.replace(extra.size() - 1, 1, ",\"zzz\":1}");
  CHECK_THROWS_AS(parse_snapshot(extra), SnapshotFormatError);
  CHECK_THROWS_AS(parse_snapshot("not json"), SnapshotFormatError);
  auto unsorted = sample_content();
  unsorted.allocations = {unsorted.allocations[1]};
  auto text = canonical_serialize(unsorted);
  text.replace(text.find("\"demand\""), 8, "\"demand\" ");
  CHECK_THROWS_AS(parse_snapshot(text), SnapshotFormatError);
}

TEST_CASE("serialize-parse-serialize round trip over fuzzed snapshots") {
  RandomStream rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    SnapshotContent c;
    c.day = static_cast<Day>(rng.next_u64() % 100);
    const int regions = 1 + static_cast<int>(rng.next_u64() % 4);
    const int drugs = 1 + static_cast<int>(rng.next_u64() % 3);
    for (int r = 0; r < regions; ++r)
      for (int d = 0; d < drugs; ++d)
        c.allocations.push_back({r, d, static_cast<Units>(rng.next_u64() % 100000),
                                 static_cast<Units>(rng.next_u64() % 100000),
                                 phi_to_ppb(rng.uniform())});
    for (int r = 0; r < regions; ++r)
      for (int d = 0; d < drugs; ++d)
        c.inventories.push_back({"hospital_" + std::to_string(r), d, static_cast<Units>(rng.next_u64() % 50000)});
    if (rng.uniform() < 0.5)
      c.disruptions.push_back({"manufacturer_0", ledger::DisruptionType::supply_halt, c.day});
    for (int d = 0; d < drugs; ++d) c.production.push_back({d, static_cast<Units>(rng.next_u64() % 20000)});
    const auto bytes = canonical_serialize(c);
    CHECK(canonical_serialize(parse_snapshot(bytes)) == bytes);
  }
}

TEST_CASE("build_snapshot addresses the stored bytes") {
  ledger::ContentStore store(fresh_dir("build"));
  const auto a = build_snapshot(sample_content(), store);
  const auto b = build_snapshot(sample_content(), store);
  CHECK(a.cid == b.cid);
  CHECK(a.integrity_hash == b.integrity_hash);
  CHECK(a.cid == a.integrity_hash.hex());
  CHECK(sha256(store.fetch(a.cid)) == a.integrity_hash);

  auto changed = sample_content();
  changed.allocations[0].quantity += 1;
  CHECK(build_snapshot(changed, store).integrity_hash != a.integrity_hash);
}

TEST_CASE("submission happy path and traceability over a 60-day run") {
  auto cfg = scenario::default_config(3, 3, 60);
  cfg.disruption.default_probability = 0.15;
  Pipeline p(cfg, fresh_dir("sixty"));
  for (Day t = 0; t < 60; ++t) p.step();

  CHECK(ledger::verify_chain(p.ledger.chain()).ok);
  for (const auto& r : p.receipts) CHECK(verify_snapshot(r, p.ledger.chain(), p.store).ok);

  // Exactly one snapshot_commit per snapshot hash, and it re-hashes.
  for (const auto& s : p.snapshots) {
    int hits = 0;
    for (const auto& rec : p.ledger.chain())
      if (rec.action == ledger::AuditAction::snapshot_commit && rec.payload_hash == s.integrity_hash) ++hits;
    CHECK(hits == 1);
    CHECK(sha256(p.store.fetch(s.cid)) == s.integrity_hash);
  }

  // Dual bookkeeping: committed balances equal the simulator's closing stock
  // before deployments land.
  for (std::size_t d = 0; d < 3; ++d)
    CHECK(p.ledger.balance("manufacturer_0", static_cast<int>(d)) == p.world.manufacturer_stock[d]);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 3; ++d)
      CHECK(p.ledger.balance("hospital_" + std::to_string(k), static_cast<int>(d)) == p.world.hospital_stock[k][d]);

  std::ostringstream chain;
  ledger::write_chain(chain, p.ledger.chain());
  CHECK(verify_audit(chain.str(), p.store, p.ledger.head()).ok);
  CHECK_FALSE(verify_audit(chain.str(), p.store, sha256("other")).ok);
}

TEST_CASE("submission rejections") {
  auto cfg = scenario::default_config(3, 3, 10);
  Pipeline p(cfg, fresh_dir("reject"));
  p.step();
  auto [outcome, after] = p.round();
  const auto content = snapshot_content(outcome, after);
  const auto good = build_snapshot(content, p.store);

  auto state_without_chain = [&] {
    auto text = p.ledger.state_text();
    return text.substr(0, text.find("chain\n"));
  };

  SUBCASE("altered stored bytes") {
    {
      std::ofstream f(p.store.path_of(good.cid), std::ios::binary | std::ios::trunc);
      f << good.bytes.substr(0, good.bytes.size() - 2) << "}}";
    }
    const auto r = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "manufacturer_0",
                                   p.mac(good));
    CHECK(r.reason == ledger::Reject::hash_mismatch);
  }
  SUBCASE("bad mac") {
    const auto r = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "manufacturer_0",
                                   sha256("forged"));
    CHECK(r.reason == ledger::Reject::bad_mac);
  }
  SUBCASE("wrong submitter") {
    const auto key = p.ledger.role("distributor_0")->auth_key;
    const auto r = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "distributor_0",
                                   snapshot_mac(key, good.bytes));
    CHECK(r.reason == ledger::Reject::unauthorized);
    const auto ghost = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "ghost",
                                       p.mac(good));
    CHECK(ghost.reason == ledger::Reject::unknown_role);
    CHECK_FALSE(ghost.tx_id.has_value());
  }
  SUBCASE("over budget leaves state untouched, twice") {
    auto bad = content;
    Units q = 0;
    for (const auto& a : bad.allocations)
      if (a.drug == 0) q += a.quantity;
    const Units available = outcome.available[0];
    for (auto& a : bad.allocations)
      if (a.drug == 0 && a.region == 0) a.quantity += available * 12 / 10 - q;
    const auto snap = build_snapshot(bad, p.store);
    const auto before = state_without_chain();
    const auto chain_len = p.ledger.chain().size();
    for (int i = 0; i < 2; ++i) {
      const auto r = submit_snapshot(p.ledger, p.store, p.params, snap.cid, snap.integrity_hash, "manufacturer_0",
                                     p.mac(snap));
      CHECK(r.reason == ledger::Reject::budget);
      CHECK(p.ledger.chain().back().action == ledger::AuditAction::snapshot_reject);
    }
    CHECK(state_without_chain() == before);
    CHECK(p.ledger.chain().size() == chain_len + 2);
  }
  SUBCASE("manufacturer books that do not add up") {
    auto bad = content;
    for (auto& i : bad.inventories)
      if (i.agent_id == "manufacturer_0" && i.drug == 1) i.quantity += 5;
    const auto snap = build_snapshot(bad, p.store);
    const auto r = submit_snapshot(p.ledger, p.store, p.params, snap.cid, snap.integrity_hash, "manufacturer_0",
                                   p.mac(snap));
    CHECK(r.reason == ledger::Reject::inventory_mismatch);
  }
  SUBCASE("stale day") {
    auto old = content;
    old.day = 0;
    for (auto& d : old.disruptions) d.timestamp = 0;
    const auto snap = build_snapshot(old, p.store);
    const auto r = submit_snapshot(p.ledger, p.store, p.params, snap.cid, snap.integrity_hash, "manufacturer_0",
                                   p.mac(snap));
    CHECK(r.reason == ledger::Reject::stale_timestamp);
  }
  SUBCASE("missing content") {
    fs::remove(p.store.path_of(good.cid));
    const auto r = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "manufacturer_0",
                                   p.mac(good));
    CHECK(r.reason == ledger::Reject::missing_content);
  }
  SUBCASE("good snapshot is accepted and verifiable; deleting it is reported") {
    const auto r = submit_snapshot(p.ledger, p.store, p.params, good.cid, good.integrity_hash, "manufacturer_0",
                                   p.mac(good));
    REQUIRE(r.accepted);
    CHECK(verify_snapshot(r, p.ledger.chain(), p.store).ok);
    fs::remove(p.store.path_of(good.cid));
    const auto f = verify_snapshot(r, p.ledger.chain(), p.store);
    CHECK_FALSE(f.ok);
    CHECK(f.reason == "missing-content");
    CHECK(f.index == *r.tx_id);
  }
}

TEST_CASE("builtin manufacturer output always passes the ledger rules") {
  RandomStream rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t regions = 1 + rng.next_u64() % 5;
    agents::ManufacturerObservation obs;
    obs.agent = {AgentClass::manufacturer, 0, -1};
    obs.available = {static_cast<Units>(rng.next_u64() % 20000)};
    obs.production = {0};
    obs.alpha = rng.uniform() * 40.0;
    obs.epsilon = rng.uniform() / static_cast<double>(regions);
    for (std::size_t r = 0; r < regions; ++r) {
      obs.severity.push_back(rng.uniform() < 0.2 ? 0.1 : rng.uniform() * 0.4);
      obs.regional_cases.push_back(0.0);
      const Units demand = rng.uniform() < 0.15 ? 0 : static_cast<Units>(rng.next_u64() % 12000);
      obs.demand.push_back({{AgentClass::distributor, static_cast<int>(r), static_cast<int>(r)},
                            static_cast<int>(r), {demand}, false});
    }
    const auto dec = agents::manufacturer_decide(obs);
    std::vector<Units> x, demand;
    std::vector<double> phi;
    for (std::size_t r = 0; r < regions; ++r) {
      x.push_back(dec.allocation[r][0]);
      demand.push_back(obs.demand[r].total[0]);
      phi.push_back(static_cast<double>(phi_to_ppb(dec.fairness.phi[r])) / 1e9);
    }
    const auto v = ledger::validate_allocation(x, obs.available[0], obs.epsilon, phi, demand);
    CHECK_MESSAGE(v.ok(), v.detail);
  }
}
