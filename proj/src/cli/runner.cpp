#include "medsim/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "medsim/coordination/topology.hpp"
#include "medsim/scenario/timeline.hpp"

namespace medsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << content;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

scenario::ScenarioConfig resolve_config(const std::string& config_path, const Overrides& o) {
  const double severity = o.severity.value_or(0.8);
  scenario::ScenarioConfig c = config_path.empty()
                                   ? scenario::default_config(o.regions.value_or(3), o.drugs.value_or(3),
                                                              o.days.value_or(30), severity)
                                   : scenario::load_config(config_path);
  if (o.regions) c.num_regions = *o.regions;
  if (o.drugs) c.num_drugs = *o.drugs;
  if (o.days) c.horizon_days = *o.days;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.disruption_prob) c.disruption.default_probability = *o.disruption_prob;
  if (o.seed) c.seed = *o.seed;
  if (c.num_regions < 1) throw ConfigError("num_regions must be >= 1");
  if (c.num_drugs < 1) throw ConfigError("num_drugs must be >= 1");
  if (o.severity)
    for (auto& p : c.sir_params) p.beta = scenario::kBaselineBeta * severity;
  scenario::conform_sizes(c, severity);
  scenario::validate(c);
  return c;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Data rows of a CSV file whose header must match exactly.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw metrics::MetricsError(path.filename().string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) rows.push_back(split(line));
  return rows;
}

long long to_int(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw metrics::MetricsError("not an integer: " + s);
  return v;
}

constexpr const char* kServiceHeader = "day,hospital,drug,opening,demand,served,unmet";
constexpr const char* kInventoryHeader = "day,agent,drug,on_hand";
constexpr const char* kFlowHeader = "day,distributor,drug,received,shipped,on_hand";

std::unique_ptr<agents::Policy> make_policy(const RunOptions& o) {
  if (o.policy == "builtin") return std::make_unique<agents::BuiltinPolicy>();
  constexpr std::string_view prefix = "external:";
  if (o.policy.rfind(prefix, 0) == 0 && o.policy.size() > prefix.size())
    return std::make_unique<policy::ExternalPolicy>(o.policy.substr(prefix.size()), o.policy_timeout_ms);
  throw ConfigError("--policy must be 'builtin' or 'external:<command>'");
}

}  // namespace

bool snapshot_verifies(std::span<const ledger::AuditRecord> chain, const ledger::ContentStore& store, Day day) {
  for (const auto& r : chain) {
    if (r.action != ledger::AuditAction::snapshot_commit || r.timestamp != day) continue;
    try {
      store.fetch(r.payload_hash.hex());
      return true;
    } catch (const ledger::StoreError&) {
    }
  }
  return false;
}

RunResult run_simulation(const RunOptions& opt, const DayObserver& observer) {
  const auto& cfg = opt.config;
  scenario::validate(cfg);
  const std::string started = utc_now();
  const auto timeline = scenario::generate_scenario(cfg);
  const auto topo = coordination::build_topology(cfg);
  auto world = coordination::initial_world(cfg, topo);
  const auto policy = make_policy(opt);
  agents::BuiltinPolicy builtin;
  const coordination::PolicyTable table{policy.get(), policy.get(), policy.get()};

  fs::create_directories(opt.out_dir);
  const fs::path dir = opt.out_dir;
  ledger::ContentStore store(dir / files::kStore);
  ledger::Ledger ledger(cfg.reserve_stock);
  const crosslayer::ContractParams params{cfg.epsilon, cfg.num_regions, cfg.num_drugs, "manufacturer_0"};
  const std::string submitter = params.manufacturer_id;

  for (const auto& n : topo.nodes) {
    const auto r = ledger.register_role({n.name(), n.cls, ledger::derive_role_key(cfg.seed, n.name())});
    if (!r.accepted) throw InvariantViolation("role registration failed for " + n.name() + ": " + r.detail);
  }
  {
    std::vector<ledger::InventoryDelta> initial;
    for (const auto& n : topo.nodes) {
      const auto& stock = world.stock_of(n);
      for (std::size_t d = 0; d < stock.size(); ++d) initial.push_back({n.name(), static_cast<int>(d), stock[d]});
    }
    const auto r = ledger.commit_inventory(submitter, initial, 0);
    if (!r.accepted) throw InvariantViolation("initial inventory commit failed: " + r.detail);
  }
  const Bytes mac_key = ledger.role(submitter)->auth_key;
  const auto distributors = topo.of_class(AgentClass::distributor);
  const auto hospitals = topo.of_class(AgentClass::hospital);

  std::ostringstream round_log, receipts, inventory, service, flow;
  round_log << coordination::kRoundLogHeader << '\n';
  receipts << crosslayer::kReceiptHeader << '\n';
  inventory << kInventoryHeader << '\n';
  service << kServiceHeader << '\n';
  flow << kFlowHeader << '\n';

  std::size_t logged = 0;
  auto log_commits = [&] {
    const auto& chain = ledger.chain();
    for (; logged < chain.size(); ++logged) {
      const auto& r = chain[logged];
      round_log << r.timestamp << ',' << ledger::to_string(r.action) << ',' << r.role_id << ",ledger,-," << r.tx_id
                << '\n';
    }
  };
  log_commits();

  std::vector<policy::PolicyEvent> ledger_events;
  int rejected = 0;
  metrics::MetricsInput minput;
  minput.buffer = cfg.buffer_targets;
  minput.criticality = cfg.drug_criticality;

  auto submit = [&](const coordination::RoundOutcome& outcome, const coordination::WorldState& after) {
    const auto snap = crosslayer::build_snapshot(crosslayer::snapshot_content(outcome, after), store);
    auto receipt = crosslayer::submit_snapshot(ledger, store, params, snap.cid, snap.integrity_hash, submitter,
                                               crosslayer::snapshot_mac(mac_key, snap.bytes));
    crosslayer::write_receipt_row(receipts, receipt);
    return receipt;
  };

  for (Day t = 0; t < cfg.horizon_days; ++t) {
    auto outcome = coordination::run_round(timeline, topo, world, table);
    auto after = coordination::apply_outcome(world, outcome);
    auto receipt = submit(outcome, after);
    if (!receipt.accepted) {
      ++rejected;
      ledger_events.push_back({t, submitter, policy::EventKind::fallback, "ledger_reject",
                               std::string(ledger::to_string(receipt.reason)) + ": " + receipt.detail});
      coordination::RecordedPolicy recorded(outcome);
      const coordination::PolicyTable retry{&recorded, &recorded, &builtin};
      auto again = coordination::run_round(timeline, topo, world, retry);
      after = coordination::apply_outcome(world, again);
      outcome = std::move(again);
      receipt = submit(outcome, after);
      if (!receipt.accepted)
        throw InvariantViolation("day " + std::to_string(t) + ": built-in allocation rejected by the ledger (" +
                                 std::string(ledger::to_string(receipt.reason)) + ": " + receipt.detail + ")");
    }

    coordination::write_round_rows(outcome, round_log);
    log_commits();
    world = std::move(after);
    for (const auto& dep : receipt.deployments) {
      for (std::size_t j = 0; j < dep.by_region.size(); ++j)
        for (std::size_t d = 0; d < dep.by_region[j].size(); ++d)
          if (dep.by_region[j][d] > 0)
            round_log << t << ",deployment,ledger," << distributors[j].name() << ',' << d << ','
                      << dep.by_region[j][d] << '\n';
      coordination::apply_deployments(world, t, cfg.lead_time_days, distributors, dep.by_region);
    }
    coordination::check_world(world);

    metrics::DayRecord rec;
    rec.day = t;
    rec.opening = outcome.opening_inventory;
    rec.demand = outcome.demand;
    rec.served = outcome.served;
    const auto drugs = static_cast<std::size_t>(cfg.num_drugs);
    rec.ordered.assign(hospitals.size(), PerDrug<Units>(drugs, 0));
    rec.fulfilled.assign(hospitals.size(), PerDrug<Units>(drugs, 0));
    rec.allocation.assign(static_cast<std::size_t>(cfg.num_regions), PerDrug<Units>(drugs, 0));
    for (const auto& m : outcome.orders) rec.ordered[static_cast<std::size_t>(m.hospital.index)] = m.quantity;
    for (const auto& m : outcome.fulfillments)
      for (std::size_t d = 0; d < drugs; ++d) rec.fulfilled[static_cast<std::size_t>(m.hospital.index)][d] += m.quantity[d];
    for (const auto& m : outcome.allocations) rec.allocation[static_cast<std::size_t>(m.region)] = m.quantity;
    for (int r = 0; r < cfg.num_regions; ++r) rec.infected.push_back(timeline.sir(r, t).i);
    minput.days.push_back(std::move(rec));

    for (const auto& n : topo.nodes) {
      const auto& stock = world.stock_of(n);
      for (std::size_t d = 0; d < stock.size(); ++d) inventory << t << ',' << n.name() << ',' << d << ',' << stock[d] << '\n';
    }
    for (std::size_t k = 0; k < hospitals.size(); ++k)
      for (std::size_t d = 0; d < drugs; ++d)
        service << t << ',' << hospitals[k].name() << ',' << d << ',' << outcome.opening_inventory[k][d] << ','
                << outcome.demand[k][d] << ',' << outcome.served[k][d] << ',' << outcome.unmet[k][d] << '\n';
    for (const auto& j : distributors)
      for (std::size_t d = 0; d < drugs; ++d) {
        Units received = 0, shipped = 0;
        for (const auto& s : outcome.delivered)
          if (s.to == j && static_cast<std::size_t>(s.drug) == d) received += s.quantity;
        for (const auto& s : outcome.scheduled)
          if (s.from == j && static_cast<std::size_t>(s.drug) == d) shipped += s.quantity;
        flow << t << ',' << j.name() << ',' << d << ',' << received << ',' << shipped << ','
             << world.stock_of(j)[d] << '\n';
      }

    if (observer) observer({outcome, world, receipt});
  }

  // Policy events: adapter events in call order, ledger rejections merged by day.
  std::vector<policy::PolicyEvent> events;
  if (const auto* ext = dynamic_cast<const policy::ExternalPolicy*>(policy.get())) events = ext->events();
  for (const auto& e : ledger_events) {
    auto at = std::find_if(events.begin(), events.end(), [&](const auto& x) { return x.day > e.day; });
    events.insert(at, e);
  }
  std::ostringstream events_csv;
  events_csv << policy::kPolicyEventHeader << '\n';
  for (const auto& e : events) {
    policy::write_event_row(events_csv, e);
    (e.kind == policy::EventKind::fallback ? minput.fallbacks : minput.clamps)++;
  }

  minput.chain = ledger.chain();
  for (auto& d : minput.days) d.snapshot_verified = snapshot_verifies(minput.chain, store, d.day);
  RunResult result;
  result.out_dir = dir;
  result.metrics = metrics::service_summary(minput);
  result.head = ledger.head();
  result.chain_length = ledger.chain().size();
  result.rejected_submissions = rejected;

  std::ostringstream chain_text, sir, demand, metrics_csv;
  ledger::write_chain(chain_text, ledger.chain());
  timeline.write_sir_csv(sir);
  timeline.write_demand_csv(demand);
  metrics::write_metrics_csv(metrics_csv, result.metrics);
  const std::string config_text = scenario::to_json(cfg).dump(2) + "\n";

  const std::map<std::string, std::string> outputs{
      {files::kConfig, config_text},
      {files::kRoundLog, round_log.str()},
      {files::kChain, chain_text.str()},
      {files::kReceipts, receipts.str()},
      {files::kMetricsJson, metrics::to_json(result.metrics).dump(2) + "\n"},
      {files::kMetricsCsv, metrics_csv.str()},
      {files::kSir, sir.str()},
      {files::kDemand, demand.str()},
      {files::kInventory, inventory.str()},
      {files::kHospitalService, service.str()},
      {files::kWarehouseFlow, flow.str()},
      {files::kPolicyEvents, events_csv.str()},
  };
  json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = sha256(config_text).hex();
  manifest["config"] = scenario::to_json(cfg);
  manifest["policy"] = opt.policy;
  manifest["policy_timeout_ms"] = opt.policy_timeout_ms;
  manifest["out_dir"] = fs::absolute(dir).string();
  manifest["audit_head"] = result.head.hex();
  manifest["chain_length"] = result.chain_length;
  manifest["days"] = cfg.horizon_days;
  manifest["rejected_submissions"] = rejected;
  manifest["files"] = json::object();
  for (const auto& [name, content] : outputs) {
    write_file_atomic(dir / name, content);
    manifest["files"][name] = sha256(content).hex();
  }
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  write_file_atomic(dir / files::kManifest, manifest.dump(2) + "\n");
  return result;
}

metrics::MetricsInput load_metrics_input(const fs::path& dir) {
  const auto cfg = scenario::config_from_json(json::parse(read_file(dir / files::kConfig)));
  const auto days = static_cast<std::size_t>(cfg.horizon_days);
  const auto regions = static_cast<std::size_t>(cfg.num_regions);
  const auto drugs = static_cast<std::size_t>(cfg.num_drugs);
  const std::size_t hospitals = regions;

  metrics::MetricsInput in;
  in.buffer = cfg.buffer_targets;
  in.criticality = cfg.drug_criticality;
  const PerDrug<Units> zeros(drugs, 0);
  for (std::size_t t = 0; t < days; ++t) {
    metrics::DayRecord d;
    d.day = static_cast<Day>(t);
    d.opening = d.demand = d.served = d.ordered = d.fulfilled =
        std::vector<PerDrug<Units>>(hospitals, zeros);
    d.allocation = std::vector<PerDrug<Units>>(regions, zeros);
    d.infected.assign(regions, 0.0);
    in.days.push_back(std::move(d));
  }
  auto day_at = [&](const std::string& s) -> metrics::DayRecord& {
    const auto t = to_int(s);
    if (t < 0 || static_cast<std::size_t>(t) >= days) throw metrics::MetricsError("day out of range: " + s);
    return in.days[static_cast<std::size_t>(t)];
  };
  auto index_of = [&](const std::string& name, AgentClass cls, std::size_t limit) {
    const auto a = parse_agent_name(name);
    if (!a || a->cls != cls || a->index < 0 || static_cast<std::size_t>(a->index) >= limit)
      throw metrics::MetricsError("unexpected agent " + name);
    return static_cast<std::size_t>(a->index);
  };
  auto drug_of = [&](const std::string& s) {
    const auto d = to_int(s);
    if (d < 0 || static_cast<std::size_t>(d) >= drugs) throw metrics::MetricsError("drug out of range: " + s);
    return static_cast<std::size_t>(d);
  };

  std::vector<std::vector<bool>> seen(days, std::vector<bool>(hospitals * drugs, false));
  for (const auto& row : read_csv(dir / files::kHospitalService, kServiceHeader)) {
    if (row.size() != 7) throw metrics::MetricsError("hospital_service.csv: truncated row");
    auto& d = day_at(row[0]);
    const auto k = index_of(row[1], AgentClass::hospital, hospitals);
    const auto j = drug_of(row[2]);
    d.opening[k][j] = to_int(row[3]);
    d.demand[k][j] = to_int(row[4]);
    d.served[k][j] = to_int(row[5]);
    seen[static_cast<std::size_t>(d.day)][k * drugs + j] = true;
  }
  for (std::size_t t = 0; t < days; ++t)
    for (bool b : seen[t])
      if (!b) throw metrics::MetricsError("hospital_service.csv: day " + std::to_string(t) + " is incomplete");

  for (const auto& row : read_csv(dir / files::kRoundLog, coordination::kRoundLogHeader)) {
    if (row.size() != 6) throw metrics::MetricsError("round_log.csv: truncated row");
    const auto& type = row[1];
    if (type == "order") {
      day_at(row[0]).ordered[index_of(row[2], AgentClass::hospital, hospitals)][drug_of(row[4])] = to_int(row[5]);
    } else if (type == "fulfillment") {
      day_at(row[0]).fulfilled[index_of(row[3], AgentClass::hospital, hospitals)][drug_of(row[4])] += to_int(row[5]);
    } else if (type == "allocation") {
      // One distributor per region, indexed by region.
      day_at(row[0]).allocation[index_of(row[3], AgentClass::distributor, regions)][drug_of(row[4])] =
          to_int(row[5]);
    }
  }

  for (const auto& row : read_csv(dir / files::kSir, "day,region,s,i,r")) {
    if (row.size() != 5) throw metrics::MetricsError("timeline_sir.csv: truncated row");
    const auto r = to_int(row[1]);
    if (r < 0 || static_cast<std::size_t>(r) >= regions) throw metrics::MetricsError("region out of range");
    day_at(row[0]).infected[static_cast<std::size_t>(r)] = std::stod(row[3]);
  }

  const auto text = read_file(dir / files::kChain);
  if (const auto v = ledger::verify_chain_text(text, &in.chain); !v.ok)
    throw metrics::MetricsError("audit chain fails at record " + std::to_string(v.first_bad) + ": " + v.reason);
  const ledger::ContentStore store(dir / files::kStore);
  for (auto& d : in.days) d.snapshot_verified = snapshot_verifies(in.chain, store, d.day);

  for (const auto& row : read_csv(dir / files::kPolicyEvents, policy::kPolicyEventHeader)) {
    if (row.size() < 4) throw metrics::MetricsError("policy_events.csv: truncated row");
    if (row[2] == "fallback") ++in.fallbacks;
    else if (row[2] == "clamp") ++in.clamps;
    else throw metrics::MetricsError("policy_events.csv: unknown kind " + row[2]);
  }
  return in;
}

crosslayer::AuditFinding verify_run(const fs::path& chain_path, const fs::path& store_dir,
                                    std::optional<Digest> expected_head) {
  if (!fs::is_directory(store_dir)) throw ConfigError("store directory not found: " + store_dir.string());
  const ledger::ContentStore store(store_dir);
  return crosslayer::verify_audit(read_file(chain_path), store, expected_head);
}

ReplayReport replay(const fs::path& manifest_path, std::optional<std::uint64_t> seed) {
  const json manifest = json::parse(read_file(manifest_path));
  const fs::path dir = manifest_path.parent_path();
  const std::string config_text = read_file(dir / files::kConfig);
  if (sha256(config_text).hex() != manifest.at("config_hash").get<std::string>())
    return {kExitConfig, "config hash mismatch: " + (dir / files::kConfig).string() + " was modified"};

  RunOptions opt;
  opt.config = scenario::config_from_json(json::parse(config_text));
  if (seed) opt.config.seed = *seed;
  opt.policy = manifest.at("policy").get<std::string>();
  opt.policy_timeout_ms = manifest.at("policy_timeout_ms").get<int>();
  static int counter = 0;
  opt.out_dir = fs::temp_directory_path() /
                ("medsim-replay-" + std::to_string(getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(opt.out_dir);

  ReplayReport report;
  try {
    const auto result = run_simulation(opt);
    std::istringstream a(read_file(dir / files::kRoundLog)), b(read_file(opt.out_dir / files::kRoundLog));
    std::string la, lb;
    for (std::size_t line = 1;; ++line) {
      const bool ha = static_cast<bool>(std::getline(a, la));
      const bool hb = static_cast<bool>(std::getline(b, lb));
      if (!ha && !hb) break;
      if (ha != hb || la != lb) {
        report = {kExitAudit, "round_log.csv line " + std::to_string(line) + ":\n- " + (ha ? la : "<end>") +
                                  "\n+ " + (hb ? lb : "<end>")};
        break;
      }
    }
    const auto head = manifest.at("audit_head").get<std::string>();
    if (report.exit_code == kExitOk && head != result.head.hex())
      report = {kExitAudit, "audit head:\n- " + head + "\n+ " + result.head.hex()};
  } catch (...) {
    fs::remove_all(opt.out_dir);
    throw;
  }
  fs::remove_all(opt.out_dir);
  return report;
}

}  // namespace medsim::cli
