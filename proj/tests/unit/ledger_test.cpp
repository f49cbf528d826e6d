#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "medsim/core/rng.hpp"
#include "medsim/ledger/ledger.hpp"
#include "medsim/ledger/store.hpp"

using namespace medsim;
using namespace medsim::ledger;
namespace fs = std::filesystem;

namespace {

RoleRecord role(const std::string& id, AgentClass cls) { return {id, cls, derive_role_key(1, id)}; }

Ledger ledger_with_roles(PerDrug<Units> reserve = {100, 100}) {
  Ledger l(std::move(reserve));
  REQUIRE(l.register_role(role("manufacturer_0", AgentClass::manufacturer)).accepted);
  REQUIRE(l.register_role(role("distributor_0", AgentClass::distributor)).accepted);
  REQUIRE(l.register_role(role("hospital_0", AgentClass::hospital)).accepted);
  return l;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("medsim_ledger_test_" + name);
  fs::remove_all(dir);
  return dir;
}

// Independent checker written from the rule text.
Reject expected_reason(const std::vector<Units>& x, Units q, double eps, const std::vector<double>& phi,
                       const std::vector<Units>& demand) {
  Units sum = 0;
  for (auto v : x) sum += v;
  if (sum > q) return Reject::budget;
  const auto fl = static_cast<Units>(std::floor(eps * static_cast<double>(q) + 1e-9));
  for (std::size_t r = 0; r < x.size(); ++r)
    if (demand[r] > 0 && x[r] < std::min(fl, demand[r])) return Reject::min_support;
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t s = 0; s < x.size(); ++s)
      if (r != s && phi[r] >= phi[s] && x[r] < demand[r] && x[r] + 1 < x[s]) return Reject::severity;
  return Reject::none;
}

}  // namespace

TEST_CASE("role registration") {
  Ledger l;
  const auto first = l.register_role(role("manufacturer_0", AgentClass::manufacturer));
  CHECK(first.accepted);
  CHECK(first.tx_id == 0u);
  const auto dup = l.register_role(role("manufacturer_0", AgentClass::distributor));
  CHECK_FALSE(dup.accepted);
  CHECK(dup.reason == Reject::duplicate_role);
  CHECK(l.chain().size() == 1);
  CHECK(l.role("manufacturer_0")->cls == AgentClass::manufacturer);

  CHECK(l.register_role({"hospital_9", AgentClass::hospital, Bytes(8, 1)}).reason == Reject::malformed_role);
  CHECK(l.register_role({"Bad Id", AgentClass::hospital, Bytes(32, 1)}).reason == Reject::malformed_role);
  CHECK(l.chain().size() == 1);

  Ledger seven;
  for (int r = 0; r < 3; ++r) {
    seven.register_role(role("distributor_" + std::to_string(r), AgentClass::distributor));
    seven.register_role(role("hospital_" + std::to_string(r), AgentClass::hospital));
  }
  seven.register_role(role("manufacturer_0", AgentClass::manufacturer));
  CHECK(seven.chain().size() == 7);
  CHECK(verify_chain(seven.chain()).ok);
}

TEST_CASE("role keys are deterministic and distinct") {
  CHECK(derive_role_key(5, "hospital_0") == derive_role_key(5, "hospital_0"));
  CHECK(derive_role_key(5, "hospital_0") != derive_role_key(6, "hospital_0"));
  CHECK(derive_role_key(5, "hospital_0") != derive_role_key(5, "hospital_1"));
  CHECK(derive_role_key(5, "x").size() == 32);
}

TEST_CASE("validate_allocation examples") {
  const std::vector<double> phi{0.4, 0.3, 0.3};
  const std::vector<Units> demand{1000, 1000, 1000};
  CHECK(validate_allocation(std::vector<Units>{400, 300, 300}, 1000, 0.05, phi, demand).ok());
  CHECK(validate_allocation(std::vector<Units>{500, 300, 300}, 1000, 0.05, phi, demand).reason ==
        Reject::budget);
  // floor(0.05·1000) = 50 > 40.
  CHECK(validate_allocation(std::vector<Units>{960, 40, 0}, 1000, 0.05, std::vector<double>{0.9, 0.05, 0.05},
                            demand)
            .reason == Reject::min_support);
  // Higher-weight region below a lower one by more than one unit.
  CHECK(validate_allocation(std::vector<Units>{300, 400, 300}, 1000, 0.05, phi, demand).reason ==
        Reject::severity);
  // One-unit slack.
  CHECK(validate_allocation(std::vector<Units>{333, 334, 333}, 1000, 0.05, std::vector<double>{0.34, 0.33, 0.33},
                            demand)
            .ok());
  // Demand-capped high-severity region is exempt, and low demand lowers its floor.
  CHECK(validate_allocation(std::vector<Units>{20, 490, 490}, 1000, 0.05, phi,
                            std::vector<Units>{20, 1000, 1000})
            .ok());
  // Regions without demand need no floor.
  CHECK(validate_allocation(std::vector<Units>{0, 500, 500}, 1000, 0.05, phi, std::vector<Units>{0, 900, 900})
            .ok());
}

TEST_CASE("validate_allocation agrees with an independent checker") {
  RandomStream rng(77);
  int accepted = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 5;
    const Units q = static_cast<Units>(rng.next_u64() % 2000);
    const double eps = rng.uniform() / static_cast<double>(n);
    std::vector<Units> x(n), demand(n);
    std::vector<double> phi(n);
    for (std::size_t r = 0; r < n; ++r) {
      x[r] = static_cast<Units>(rng.next_u64() % static_cast<std::uint64_t>(q / static_cast<Units>(n) + 3));
      demand[r] = rng.uniform() < 0.2 ? 0 : static_cast<Units>(rng.next_u64() % 1500);
      phi[r] = std::floor(rng.uniform() * 4.0) / 4.0;
    }
    const auto v = validate_allocation(x, q, eps, phi, demand);
    CHECK(v.reason == expected_reason(x, q, eps, phi, demand));
    if (v.ok()) ++accepted;
  }
  CHECK(accepted > 0);
}

TEST_CASE("commit_inventory is atomic") {
  auto l = ledger_with_roles();
  CHECK(l.commit_inventory("manufacturer_0", std::vector<InventoryDelta>{{"hospital_0", 0, 5}}, 0).accepted);
  CHECK(l.balance("hospital_0", 0) == 5);

  const auto zero = l.commit_inventory("manufacturer_0", std::vector<InventoryDelta>{{"hospital_0", 0, 0}}, 0);
  CHECK(zero.accepted);
  CHECK(l.balance("hospital_0", 0) == 5);

  const auto before = l.state_text();
  const auto bad = l.commit_inventory(
      "manufacturer_0", std::vector<InventoryDelta>{{"distributor_0", 1, 50}, {"hospital_0", 0, -10}}, 1);
  CHECK_FALSE(bad.accepted);
  CHECK(bad.reason == Reject::negative_balance);
  CHECK(l.state_text() == before);

  CHECK(l.commit_inventory("stranger", std::vector<InventoryDelta>{}, 1).reason == Reject::unknown_role);
  CHECK(l.commit_inventory("manufacturer_0", std::vector<InventoryDelta>{{"stranger", 0, 1}}, 1).reason ==
        Reject::unknown_role);
  CHECK(l.state_text() == before);
}

TEST_CASE("report_disruption deploys from the reserve") {
  auto l = ledger_with_roles({100, 100});
  const auto none = l.report_disruption({"manufacturer_0", DisruptionType::supply_halt, 3},
                                        std::vector<Units>{0, 0});
  CHECK(none.report.accepted);
  CHECK(none.deploy.accepted);
  CHECK(none.deployed == PerDrug<Units>{0, 0});
  CHECK(l.chain().size() == 5);
  CHECK(l.chain()[3].action == AuditAction::disruption_commit);
  CHECK(l.chain()[4].action == AuditAction::reserve_deploy);

  const auto big = l.report_disruption({"manufacturer_0", DisruptionType::supply_halt, 3},
                                       std::vector<Units>{250, 0});
  CHECK(big.deployed == PerDrug<Units>{100, 0});
  CHECK(l.reserve() == PerDrug<Units>{0, 100});

  // Sequential depletion in tx order.
  auto two = ledger_with_roles({100, 0});
  const auto a = two.report_disruption({"manufacturer_0", DisruptionType::supply_halt, 2},
                                       std::vector<Units>{80, 0});
  const auto b = two.report_disruption({"distributor_0", DisruptionType::transit_delay, 2},
                                       std::vector<Units>{80, 0});
  CHECK(a.deployed[0] == 80);
  CHECK(b.deployed[0] == 20);
  CHECK(*a.deploy.tx_id < *b.report.tx_id);

  CHECK(two.report_disruption({"nobody", DisruptionType::supply_halt, 2}, std::vector<Units>{1, 0}).report.reason ==
        Reject::unknown_role);
  two.close_day(2);
  const auto before = two.state_text();
  CHECK(two.report_disruption({"manufacturer_0", DisruptionType::supply_halt, 2}, std::vector<Units>{1, 0})
            .report.reason == Reject::stale_timestamp);
  CHECK(two.state_text() == before);
  CHECK(two.chain().size() == 7);
}

TEST_CASE("reserve never goes negative over fuzzed reports") {
  auto l = ledger_with_roles({500, 300});
  RandomStream rng(3);
  Units total0 = 0, total1 = 0;
  for (int i = 0; i < 200; ++i) {
    const auto out = l.report_disruption({"manufacturer_0", DisruptionType::supply_halt, i},
                                         std::vector<Units>{static_cast<Units>(rng.next_u64() % 50),
                                                            static_cast<Units>(rng.next_u64() % 50)});
    total0 += out.deployed[0];
    total1 += out.deployed[1];
    CHECK(l.reserve()[0] >= 0);
    CHECK(l.reserve()[1] >= 0);
  }
  CHECK(total0 == 500);
  CHECK(total1 == 300);
}

TEST_CASE("audit chain linkage") {
  auto l = ledger_with_roles();
  CHECK(l.chain()[0].prev_hash == Digest::zero());
  CHECK(l.chain()[1].prev_hash == l.chain()[0].record_hash);
  const auto& rec = l.append_audit(AuditAction::snapshot_commit, "manufacturer_0", sha256("x"), 4);
  CHECK(rec.tx_id == 3u);
  CHECK(rec.timestamp == 4);
  CHECK_THROWS_AS(l.append_audit(AuditAction::snapshot_commit, "ghost", sha256("x"), 4), std::invalid_argument);
  CHECK(l.chain().size() == 4);
}

TEST_CASE("chain line round trip and strict parsing") {
  auto l = ledger_with_roles();
  for (const auto& r : l.chain()) CHECK(parse_line(to_line(r)) == r);
  const auto line = to_line(l.chain()[1]);
  CHECK_FALSE(parse_line(line + ","));
  CHECK_FALSE(parse_line("0" + line));
  CHECK_FALSE(parse_line(line.substr(0, line.size() - 1)));
  auto upper = line;
  upper.back() = static_cast<char>(std::toupper(static_cast<unsigned char>(upper.back())));
  if (upper != line) CHECK_FALSE(parse_line(upper));
  CHECK(parse_line(line.substr(0, 1) + "\r" + line.substr(1)) == std::nullopt);
}

TEST_CASE("verify_chain detects tampering at the right index") {
  Ledger l(PerDrug<Units>{10});
  l.register_role(role("manufacturer_0", AgentClass::manufacturer));
  for (int i = 0; i < 9; ++i)
    l.append_audit(AuditAction::snapshot_commit, "manufacturer_0", sha256(std::to_string(i)), i);
  auto chain = l.chain();
  CHECK(verify_chain(chain).ok);

  auto flipped = chain;
  flipped[5].payload_hash.bytes[7] ^= 0x10;
  const auto v = verify_chain(flipped);
  CHECK_FALSE(v.ok);
  CHECK(v.first_bad == 5);

  chain.resize(6);
  CHECK(verify_chain(chain).ok);

  // Every single-bit flip in the exported text is caught on the line it hits.
  std::ostringstream out;
  write_chain(out, l.chain());
  const std::string text = out.str();
  CHECK(verify_chain_text(text).ok);
  std::vector<std::size_t> line_of(text.size());
  std::size_t line = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    line_of[i] = line;
    if (text[i] == '\n') ++line;
  }
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      auto t = text;
      t[i] = static_cast<char>(t[i] ^ (1 << bit));
      const auto verdict = verify_chain_text(t);
      REQUIRE_FALSE(verdict.ok);
      CHECK(verdict.first_bad == line_of[i]);
    }
  }
}

TEST_CASE("content store") {
  ContentStore store(fresh_dir("store"));
  CHECK(store.store("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto cid = store.store("payload");
  CHECK(store.store("payload") == cid);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(store.dir())) ++files;
  CHECK(files == 2);

  RandomStream rng(12);
  for (int i = 0; i < 200; ++i) {
    std::string p(rng.next_u64() % 300, '\0');
    for (auto& c : p) c = static_cast<char>(rng.next_u64() & 0xff);
    CHECK(store.fetch(store.store(p)) == p);
  }

  {
    std::fstream f(store.path_of(cid), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(2);
    f.put('X');
  }
  try {
    store.fetch(cid);
    FAIL("expected corruption");
  } catch (const StoreError& e) {
    CHECK(e.kind() == StoreError::Kind::corrupted);
  }
  fs::remove(store.path_of(cid));
  try {
    store.fetch(cid);
    FAIL("expected not found");
  } catch (const StoreError& e) {
    CHECK(e.kind() == StoreError::Kind::not_found);
  }
  CHECK_THROWS_AS(store.fetch("../etc/passwd"), StoreError);
}
