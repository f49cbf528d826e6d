#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "medsim/cli/runner.hpp"
#include "medsim/scenario/timeline.hpp"

using namespace medsim;
using namespace medsim::cli;
namespace fs = std::filesystem;

namespace {

void print_summary(const RunResult& r) {
  const auto& m = r.metrics;
  auto opt = [](const std::optional<double>& v) { return v ? scenario::format_double(*v) : std::string("n/a"); };
  std::cout << "run: " << r.out_dir.string() << '\n'
            << "  service_level     " << scenario::format_double(m.service_level) << " %\n"
            << "  unfulfilled       " << scenario::format_double(m.unfulfilled_pct) << " %\n"
            << "  demand_served     " << scenario::format_double(m.demand_served_pct) << " %\n"
            << "  mean_eta          " << opt(m.mean_eta) << '\n'
            << "  mean_delta        " << opt(m.mean_delta) << '\n'
            << "  stockout episodes " << m.episodes.size() << " (" << m.unrecovered_episodes << " unrecovered)\n"
            << "  mean_tau          " << opt(m.mean_tau) << '\n'
            << "  throughput        " << m.total_throughput << " records\n"
            << "  auditability      " << scenario::format_double(m.auditability) << '\n'
            << "  fallbacks/clamps  " << m.fallbacks << '/' << m.clamps << '\n'
            << "  rejected          " << r.rejected_submissions << '\n'
            << "  audit head        " << r.head.hex() << '\n';
}

std::vector<double> parse_sweep(const std::string& arg) {
  constexpr std::string_view key = "disruption=";
  if (arg.rfind(key, 0) != 0) throw ConfigError("--sweep expects disruption=<p>,<p>,...");
  std::vector<double> out;
  std::istringstream s(arg.substr(key.size()));
  std::string item;
  while (std::getline(s, item, ',')) {
    std::size_t used = 0;
    double p = 0;
    try {
      p = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("--sweep: bad probability '" + item + "'");
    out.push_back(p);
  }
  if (out.empty()) throw ConfigError("--sweep: no probabilities given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pandemic drug supply chain simulator with an enforcement ledger"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* run = app.add_subcommand("run", "Run a simulation and write its artifacts");
  std::string config_path, policy = "builtin", out = "out", sweep;
  int timeout_ms = policy::kDefaultTimeoutMs;
  Overrides ov;
  run->add_option("--config", config_path, "Scenario config (JSON)");
  run->add_option("--alpha", ov.alpha, "Fairness sharpness");
  run->add_option("--epsilon", ov.epsilon, "Minimum-support fraction");
  run->add_option("--disruption-prob", ov.disruption_prob, "Default disruption probability");
  run->add_option("--days", ov.days, "Horizon in days");
  run->add_option("--regions", ov.regions, "Number of regions");
  run->add_option("--drugs", ov.drugs, "Number of drugs");
  run->add_option("--seed", ov.seed, "Master seed");
  run->add_option("--severity", ov.severity, "Pandemic severity multiplier on the infection rate");
  run->add_option("--policy", policy, "builtin | external:<command>");
  run->add_option("--policy-timeout-ms", timeout_ms, "Deadline per external decision");
  run->add_option("--out", out, "Output directory");
  run->add_option("--sweep", sweep, "disruption=<p>,<p>,... (one run per value, in <out>/disruption_<p>)");

  auto* verify = app.add_subcommand("verify-audit", "Verify an exported audit chain and content store");
  std::string run_dir, chain_path, store_path, head_hex;
  verify->add_option("run_dir", run_dir, "Run directory (uses its chain, store and manifest head)");
  verify->add_option("--chain", chain_path, "Audit chain file");
  verify->add_option("--store", store_path, "Content store directory");
  verify->add_option("--head", head_hex, "Expected head hash");

  auto* rep = app.add_subcommand("replay", "Re-run a recorded run and diff it");
  std::string manifest_path;
  std::optional<std::uint64_t> replay_seed;
  rep->add_option("manifest", manifest_path, "manifest.json of the run")->required();
  rep->add_option("--seed", replay_seed, "Replace the recorded seed");

  auto* met = app.add_subcommand("metrics", "Recompute metrics from a run's exported files");
  std::string metrics_dir;
  bool check = false;
  met->add_option("run_dir", metrics_dir, "Run directory")->required();
  met->add_flag("--check", check, "Compare with the run's metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      const auto base = resolve_config(config_path, ov);
      if (sweep.empty()) {
        print_summary(run_simulation({base, policy, timeout_ms, out}));
        return kExitOk;
      }
      for (double p : parse_sweep(sweep)) {
        auto cfg = base;
        cfg.disruption.default_probability = p;
        scenario::validate(cfg);
        print_summary(run_simulation({cfg, policy, timeout_ms, fs::path(out) / ("disruption_" + scenario::format_double(p))}));
      }
      return kExitOk;
    }
    if (*verify) {
      std::optional<Digest> head;
      if (!run_dir.empty()) {
        if (chain_path.empty()) chain_path = (fs::path(run_dir) / files::kChain).string();
        if (store_path.empty()) store_path = (fs::path(run_dir) / files::kStore).string();
        const auto manifest = fs::path(run_dir) / files::kManifest;
        if (head_hex.empty() && fs::exists(manifest))
          head_hex = nlohmann::json::parse(read_file(manifest)).at("audit_head").get<std::string>();
      }
      if (chain_path.empty() || store_path.empty()) throw ConfigError("verify-audit needs a run directory or --chain and --store");
      if (!head_hex.empty()) {
        head = parse_digest(head_hex);
        if (!head) throw ConfigError("--head is not a lowercase hex digest");
      }
      const auto finding = verify_run(chain_path, store_path, head);
      if (finding.ok) {
        std::cout << "ok\n";
        return kExitOk;
      }
      std::cout << "FAIL at record " << finding.index << ": " << finding.reason << '\n';
      return kExitAudit;
    }
    if (*rep) {
      const auto report = replay(manifest_path, replay_seed);
      if (report.exit_code == kExitOk) {
        std::cout << "replay: identical\n";
      } else {
        std::cout << "replay: " << report.message << '\n';
      }
      return report.exit_code;
    }
    if (*met) {
      const auto recomputed = metrics::to_json(metrics::service_summary(load_metrics_input(metrics_dir)));
      if (!check) {
        std::cout << recomputed.dump(2) << '\n';
        return kExitOk;
      }
      const auto stored = nlohmann::json::parse(read_file(fs::path(metrics_dir) / files::kMetricsJson));
      if (stored == recomputed) {
        std::cout << "metrics: identical\n";
        return kExitOk;
      }
      std::cout << "metrics: differ\n" << nlohmann::json::diff(stored, recomputed).dump(2) << '\n';
      return kExitAudit;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const metrics::MetricsError& e) {
    std::cerr << "audit failure: " << e.what() << '\n';
    return kExitAudit;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
