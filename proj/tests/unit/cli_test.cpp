#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"

#include "medsim/cli/runner.hpp"

using namespace medsim;
using namespace medsim::cli;
namespace fs = std::filesystem;

namespace {

const std::string kMedsim = MEDSIM_BIN;
const std::string kTool = MEDSIM_POLICY_TOOL;

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("medsim-cli-test-" + name);
  fs::remove_all(p);
  return p;
}

RunResult run(const std::string& name, scenario::ScenarioConfig cfg, std::string policy = "builtin",
              const DayObserver& obs = {}) {
  RunOptions o;
  o.config = std::move(cfg);
  o.policy = std::move(policy);
  o.policy_timeout_ms = 2000;
  o.out_dir = fresh_dir(name);
  return run_simulation(o, obs);
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void flip_byte(const fs::path& p, std::size_t offset) {
  auto text = read_file(p);
  text[offset] = static_cast<char>(text[offset] ^ 0x01);
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

}  // namespace

TEST_CASE("config resolution") {
  const auto d = resolve_config("", {});
  CHECK(d.num_regions == 3);
  CHECK(d.num_drugs == 3);
  CHECK(d.horizon_days == 30);
  CHECK(d.disruption.default_probability == 0.1);

  Overrides o;
  o.regions = 5;
  o.drugs = 2;
  o.days = 12;
  o.alpha = 2.0;
  o.epsilon = 0.1;
  o.disruption_prob = 0.25;
  o.seed = 9;
  o.severity = 1.0;
  const auto c = resolve_config("", o);
  CHECK(c.num_regions == 5);
  CHECK(c.sir_params.size() == 5);
  CHECK(c.buffer_targets.size() == 5);
  CHECK(c.drug_criticality.size() == 2);
  CHECK(c.alpha == 2.0);
  CHECK(c.seed == 9);
  CHECK(c.disruption.default_probability == 0.25);
  for (const auto& p : c.sir_params) CHECK(p.beta == scenario::kBaselineBeta);

  Overrides bad;
  bad.days = 0;
  CHECK_THROWS_AS(resolve_config("", bad), ConfigError);
  bad = {};
  bad.disruption_prob = 1.5;
  CHECK_THROWS_AS(resolve_config("", bad), ConfigError);
  CHECK_THROWS_AS(resolve_config("/nonexistent/config.json", {}), ConfigError);
}

TEST_CASE("default run writes self-consistent artifacts") {
  auto cfg = resolve_config("", {});
  std::vector<coordination::WorldState> worlds;
  const auto r = run("defaults", cfg, "builtin", [&](const DayTrace& t) { worlds.push_back(t.world); });
  const auto dir = r.out_dir;
  for (const char* f : {files::kConfig, files::kManifest, files::kRoundLog, files::kChain, files::kReceipts,
                        files::kMetricsJson, files::kMetricsCsv, files::kSir, files::kDemand, files::kInventory,
                        files::kHospitalService, files::kWarehouseFlow, files::kPolicyEvents})
    CHECK_MESSAGE(fs::exists(dir / f), f);

  CHECK(worlds.size() == 30);
  for (const auto& w : worlds)
    for (int d = 0; d < 3; ++d) {
      const auto i = static_cast<std::size_t>(d);
      CHECK(w.initial_stock[i] + w.produced[i] + w.deployed[i] == w.consumed[i] + w.units_in_system(d));
    }

  // Throughput partition and the round log's commit rows agree day by day.
  const auto chain = lines(dir / files::kChain);
  CHECK(r.chain_length == chain.size());
  CHECK(r.metrics.total_throughput == r.chain_length);
  std::map<int, std::size_t> commit_rows;
  std::set<std::string> actions{"role_register",     "snapshot_commit", "snapshot_reject", "allocation_commit",
                                "inventory_commit", "disruption_commit", "reserve_deploy"};
  for (const auto& l : lines(dir / files::kRoundLog)) {
    std::istringstream s(l);
    std::string day, type;
    std::getline(s, day, ',');
    std::getline(s, type, ',');
    if (actions.count(type)) ++commit_rows[std::stoi(day)];
  }
  for (const auto& d : r.metrics.days) CHECK(d.throughput == commit_rows[d.day]);

  const auto manifest = nlohmann::json::parse(read_file(dir / files::kManifest));
  CHECK(manifest["audit_head"] == r.head.hex());
  CHECK(manifest["config_hash"] == sha256(read_file(dir / files::kConfig)).hex());
  CHECK(manifest["version"] == kVersion);
  for (const auto& [name, hash] : manifest["files"].items()) CHECK(hash == sha256(read_file(dir / name)).hex());

  // Metrics recomputed from the exported files equal the in-memory report.
  const auto reloaded = metrics::service_summary(load_metrics_input(dir));
  CHECK(metrics::to_json(reloaded) == metrics::to_json(r.metrics));
  CHECK(nlohmann::json::parse(read_file(dir / files::kMetricsJson)) == metrics::to_json(r.metrics));

  CHECK(verify_run(dir / files::kChain, dir / files::kStore, r.head).ok);
}

TEST_CASE("abundance and starvation") {
  auto cfg = resolve_config("", {});
  const auto rich = run("abundance", cfg);
  CHECK(rich.metrics.service_level == 100.0);
  CHECK(rich.metrics.unfulfilled_pct == 0.0);

  cfg.manufacturer_capacity.assign(3, 0);
  cfg.distributor_initial_stock.assign(3, PerDrug<Units>(3, 0));
  cfg.reserve_stock.assign(3, 0);
  const auto poor = run("starvation", cfg);
  CHECK(poor.metrics.service_level < 100.0);
  CHECK(poor.metrics.unfulfilled_pct > 0.0);
}

TEST_CASE("metrics refuse tampered or truncated exports") {
  const auto r = run("refuse", resolve_config("", {}));
  const auto dir = r.out_dir;

  SUBCASE("a day missing from the chain") {
    auto chain = lines(dir / files::kChain);
    std::ostringstream keep;
    for (const auto& l : chain) {
      if (l.find(",29,") != std::string::npos) break;
      keep << l << '\n';
    }
    std::ofstream(dir / files::kChain, std::ios::trunc) << keep.str();
    CHECK_THROWS_AS(metrics::service_summary(load_metrics_input(dir)), metrics::MetricsError);
  }
  SUBCASE("a flipped chain byte") {
    flip_byte(dir / files::kChain, 100);
    CHECK_THROWS_AS(load_metrics_input(dir), metrics::MetricsError);
  }
  SUBCASE("a truncated service log") {
    auto text = read_file(dir / files::kHospitalService);
    std::ofstream(dir / files::kHospitalService, std::ios::trunc) << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_metrics_input(dir), std::exception);
  }
  SUBCASE("a deleted snapshot lowers auditability") {
    const auto chain = lines(dir / files::kChain);
    for (const auto& l : chain)
      if (l.find(",snapshot_commit,") != std::string::npos) {
        fs::remove(dir / files::kStore / l.substr(l.find(",snapshot_commit,") + 17, 64));
        break;
      }
    const auto m = metrics::service_summary(load_metrics_input(dir));
    CHECK(m.auditability == doctest::Approx(29.0 / 30.0));
  }
}

TEST_CASE("verify-audit") {
  const auto r = run("verify", resolve_config("", {}));
  const auto dir = r.out_dir;
  const auto chain = lines(dir / files::kChain);

  SUBCASE("flipped byte is found at its record") {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < 40; ++i) offset += chain[i].size() + 1;
    flip_byte(dir / files::kChain, offset + 3);
    const auto f = verify_run(dir / files::kChain, dir / files::kStore, r.head);
    CHECK_FALSE(f.ok);
    CHECK(f.index == 40);
  }
  SUBCASE("deleted store object is named") {
    std::size_t index = 0;
    std::string cid;
    for (std::size_t i = 0; i < chain.size(); ++i)
      if (auto at = chain[i].find(",snapshot_commit,"); at != std::string::npos && i > 50) {
        index = i;
        cid = chain[i].substr(at + 17, 64);
        break;
      }
    REQUIRE_FALSE(cid.empty());
    fs::remove(dir / files::kStore / cid);
    const auto f = verify_run(dir / files::kChain, dir / files::kStore, r.head);
    CHECK_FALSE(f.ok);
    CHECK(f.index == index);
    CHECK(f.reason.find("missing-content") != std::string::npos);
  }
  SUBCASE("missing files") {
    CHECK_THROWS_AS(verify_run(dir / "nope.log", dir / files::kStore), ConfigError);
    CHECK_THROWS_AS(verify_run(dir / files::kChain, dir / "nope"), ConfigError);
  }
}

TEST_CASE("replay") {
  auto cfg = resolve_config("", {});
  cfg.disruption.default_probability = 0.3;
  const auto r = run("replay", cfg);
  const auto manifest = r.out_dir / files::kManifest;

  CHECK(replay(manifest).exit_code == kExitOk);
  CHECK(replay(manifest).message.empty());

  const auto other = replay(manifest, 43);
  CHECK(other.exit_code == kExitAudit);
  CHECK(other.message.find("round_log.csv line") != std::string::npos);

  auto text = read_file(r.out_dir / files::kConfig);
  text.replace(text.find("\"alpha\": 15.0"), 13, "\"alpha\": 14.0");
  std::ofstream(r.out_dir / files::kConfig, std::ios::trunc) << text;
  const auto edited = replay(manifest);
  CHECK(edited.exit_code == kExitConfig);
  CHECK(edited.message.find("config hash mismatch") != std::string::npos);
}

TEST_CASE("seed changes the audit head") {
  auto cfg = resolve_config("", {});
  const auto a = run("seed-a", cfg);
  cfg.seed += 1;
  const auto b = run("seed-b", cfg);
  CHECK(a.head != b.head);
}

TEST_CASE("external policies") {
  auto cfg = resolve_config("", {});
  cfg.disruption.default_probability = 0.2;
  const auto base = run("ext-builtin", cfg);

  SUBCASE("echo is byte-identical to the built-in run") {
    const auto echo = run("ext-echo", cfg, "external:" + kTool + " echo");
    CHECK(read_file(echo.out_dir / files::kRoundLog) == read_file(base.out_dir / files::kRoundLog));
    CHECK(echo.head == base.head);
    CHECK(echo.metrics.fallbacks == 0);
  }
  SUBCASE("killed mid-run completes through fallbacks") {
    const auto crash = run("ext-crash", cfg, "external:" + kTool + " crash --after 40");
    CHECK(crash.metrics.fallbacks == 30 * 7 - 40);
    CHECK(crash.head == base.head);
  }
  SUBCASE("fuzzed responses never break the run") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto fuzz = run("ext-fuzz", cfg, "external:" + kTool + " fuzz --seed " + std::to_string(seed),
                            [](const DayTrace& t) { coordination::check_world(t.world); });
      CHECK(fuzz.metrics.fallbacks > 0);
      CHECK(verify_run(fuzz.out_dir / files::kChain, fuzz.out_dir / files::kStore, fuzz.head).ok);
      CHECK(metrics::to_json(metrics::service_summary(load_metrics_input(fuzz.out_dir))) ==
            metrics::to_json(fuzz.metrics));
    }
  }
  SUBCASE("bad policy string") {
    CHECK_THROWS_AS(run("ext-bad", cfg, "random"), ConfigError);
    CHECK_THROWS_AS(run("ext-bad", cfg, "external:"), ConfigError);
  }
}

TEST_CASE("command line") {
  const auto out = fresh_dir("cmd");
  CHECK(shell(kMedsim + " run --days 0 --out " + out.string()) == kExitConfig);
  CHECK(shell(kMedsim + " run --policy bogus --out " + out.string()) == kExitConfig);
  CHECK(shell(kMedsim + " run --bogus-flag") == kExitConfig);
  CHECK(shell(kMedsim + " run --days 8 --out " + out.string()) == kExitOk);
  CHECK(shell(kMedsim + " verify-audit " + out.string()) == kExitOk);
  CHECK(shell(kMedsim + " metrics --check " + out.string()) == kExitOk);
  CHECK(shell(kMedsim + " replay " + (out / files::kManifest).string()) == kExitOk);
  CHECK(shell(kMedsim + " replay --seed 5 " + (out / files::kManifest).string()) == kExitAudit);
  CHECK(shell(kMedsim + " verify-audit --chain " + (out / "missing").string() + " --store " +
              (out / files::kStore).string()) == kExitConfig);
  flip_byte(out / files::kChain, 10);
  CHECK(shell(kMedsim + " verify-audit " + out.string()) == kExitAudit);

  const auto sweep = fresh_dir("sweep");
  CHECK(shell(kMedsim + " run --days 10 --sweep disruption=0.05,0.15,0.25 --out " + sweep.string()) == kExitOk);
  for (const char* p : {"disruption_0.05", "disruption_0.15", "disruption_0.25"}) {
    CHECK(fs::exists(sweep / p / files::kManifest));
    CHECK(fs::exists(sweep / p / files::kMetricsJson));
  }
  CHECK(shell(kMedsim + " run --sweep disruption=0.1,x --out " + sweep.string()) == kExitConfig);
}
