#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "medsim/agents/agents.hpp"
#include "medsim/core/apportion.hpp"
#include "medsim/scenario/timeline.hpp"

using namespace medsim;
using namespace medsim::agents;

namespace {

// Test-only oracles: written directly from the formulas with long double and
// an explicit sort, sharing no code with the apportionment helpers.
std::vector<long double> softmax_oracle(const std::vector<double>& s, double alpha) {
  std::vector<long double> w;
  long double sum = 0;
  for (double x : s) {
    w.push_back(std::exp(static_cast<long double>(alpha) * x));
    sum += w.back();
  }
  for (auto& x : w) x /= sum;
  return w;
}

std::vector<Units> largest_remainder_oracle(const std::vector<long double>& w, Units total) {
  long double sum = 0;
  for (auto x : w) sum += x;
  std::vector<Units> out;
  std::vector<std::pair<long double, std::size_t>> fr;
  Units used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const long double q = total * w[i] / sum;
    out.push_back(static_cast<Units>(std::floor(q)));
    fr.emplace_back(q - std::floor(q), i);
    used += out.back();
  }
  std::sort(fr.begin(), fr.end(), [](auto a, auto b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (Units k = 0; k < total - used; ++k) ++out[fr[static_cast<std::size_t>(k)].second];
  return out;
}

Units sum(const std::vector<Units>& v) { return std::accumulate(v.begin(), v.end(), Units{0}); }

}  // namespace

TEST_CASE("order estimator") {
  CHECK(tool_order_estimator(100, 40, 30) == 30);
  CHECK(tool_order_estimator(100, 100, 0) == 0);
  CHECK(tool_order_estimator(100, 120, 50) == 0);
}

TEST_CASE("allocation engine examples") {
  CHECK(tool_allocation_engine(std::vector<double>{0.3, 0.1, 0.9}, 0.0, 300) ==
        std::vector<Units>{100, 100, 100});
  CHECK(tool_allocation_engine(std::vector<double>{0.7}, 12.0, 250) == std::vector<Units>{250});

  const std::vector<double> s{2, 1, 0};
  const auto phi = fairness_weights(s, 1.0).phi;
  const auto oracle = softmax_oracle(s, 1.0);
  const double expected[] = {0.66524, 0.24473, 0.09003};
  for (int r = 0; r < 3; ++r) {
    CHECK(phi[static_cast<std::size_t>(r)] == doctest::Approx(static_cast<double>(oracle[static_cast<std::size_t>(r)])).epsilon(1e-12));
    CHECK(std::abs(phi[static_cast<std::size_t>(r)] - expected[r]) < 5e-6);
  }
  CHECK(largest_remainder_oracle(oracle, 1000) == std::vector<Units>{665, 245, 90});
  CHECK(tool_allocation_engine(s, 1.0, 1000) == std::vector<Units>{665, 245, 90});
}

TEST_CASE("allocation engine rejects bad input") {
  CHECK_THROWS_AS(tool_allocation_engine(std::vector<double>{1.0, NAN}, 1.0, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(tool_allocation_engine(std::vector<double>{1.0, INFINITY}, 1.0, 10),
                  std::invalid_argument);
}

TEST_CASE("allocation engine survives large alpha·S") {
  const auto out = tool_allocation_engine(std::vector<double>{900.0, 899.0, 0.0}, 10.0, 1000);
  CHECK(sum(out) == 1000);
  CHECK(out[0] == 1000);
}

TEST_CASE("fairness floor") {
  const std::vector<Units> base{990, 10, 0};
  CHECK(tool_fairness_floor(base, 0.0, 1000) == base);

  // Oracle: deficits are raised to floor(εQ); each cut is the floor or ceiling
  // of need·surplus_r/Σsurplus, and the cuts sum to the need.
  const auto out = tool_fairness_floor(base, 0.05, 1000);
  CHECK(sum(out) == 1000);
  for (Units x : out) CHECK(x >= 50);
  const Units need = (50 - 10) + (50 - 0);
  const double exact_cut = static_cast<double>(need) * 940.0 / 940.0;
  CHECK(base[0] - out[0] == static_cast<Units>(exact_cut));
  CHECK(out == std::vector<Units>{900, 50, 50});

  CHECK(tool_fairness_floor(std::vector<Units>{700, 200, 99}, 1.0 / 3.0, 999) ==
        std::vector<Units>{333, 333, 333});
  CHECK_THROWS_AS(tool_fairness_floor(std::vector<Units>{5, 5}, 0.6, 10), std::invalid_argument);
  CHECK_THROWS_AS(tool_fairness_floor(std::vector<Units>{5, 4}, 0.1, 10), std::invalid_argument);
}

TEST_CASE("fairness floor: proportional-surplus property over fuzzed allocations") {
  RandomStream rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t regions = 1 + rng.next_u64() % 6;
    const Units q = static_cast<Units>(rng.next_u64() % 5000);
    std::vector<double> w(regions);
    for (auto& x : w) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    w[0] += 1e-3;
    const auto base = largest_remainder(w, q);
    const double eps = rng.uniform() / static_cast<double>(regions);
    const auto out = tool_fairness_floor(base, eps, q);
    const Units fl = static_cast<Units>(std::floor(eps * static_cast<double>(q) + 1e-9));
    CHECK(sum(out) == q);
    Units need = 0;
    double total_surplus = 0;
    for (std::size_t r = 0; r < regions; ++r) {
      CHECK(out[r] >= fl);
      if (base[r] < fl) need += fl - base[r];
      else total_surplus += static_cast<double>(base[r] - fl);
    }
    for (std::size_t r = 0; r < regions; ++r) {
      if (base[r] < fl) {
        CHECK(out[r] == fl);
      } else if (need > 0) {
        const double exact = static_cast<double>(need) * static_cast<double>(base[r] - fl) / total_surplus;
        const Units cut = base[r] - out[r];
        CHECK(static_cast<double>(cut) >= std::floor(exact) - 1e-9);
        CHECK(static_cast<double>(cut) <= std::ceil(exact) + 1e-9);
      } else {
        CHECK(out[r] == base[r]);
      }
    }
  }
}

TEST_CASE("criticality") {
  CHECK(tool_criticality(100, 60, 40, 1.0).value == 0.0);
  CHECK(tool_criticality(100, 200, 0, 0.7).value == 0.0);
  CHECK(tool_criticality(100, 0, 0, 1.0).value == 1.0);
  CHECK(tool_criticality(200, 50, 50, 0.5).value == doctest::Approx(0.25));
  CHECK(tool_criticality(0, 0, 0, 1.0).value == 0.0);
}

TEST_CASE("epidemic predictor") {
  auto cfg = scenario::default_config(1, 1, 20);
  cfg.sir_params[0] = {0.0, 0.1, 10000, 500.0};
  cfg.demand_noise_frac = 0.0;
  const auto t = scenario::generate_scenario(cfg);
  CHECK(tool_epidemic_predictor(t, 0, 0, 3, 0).empty());
  const auto f = tool_epidemic_predictor(t, 0, 0, 0, 20);
  REQUIRE(f.size() == 20);
  for (std::size_t k = 1; k < f.size(); ++k) CHECK(f[k] < f[k - 1]);
  for (Day d = 0; d < 20; ++d)
    CHECK(std::llround(tool_epidemic_predictor(t, 0, 0, d, 1)[0]) == t.demand(d, 0, 0).expected);
  CHECK_THROWS_AS(tool_epidemic_predictor(t, 0, 0, 15, 6), std::out_of_range);
}

TEST_CASE("disruption simulator delegates") {
  RandomStream rng(4);
  CHECK_FALSE(tool_disruption_simulator(0.0, rng));
  CHECK(tool_disruption_simulator(1.0, rng));
  CHECK_THROWS(tool_disruption_simulator(2.0, rng));
}

namespace {
HospitalObservation hospital_obs(Units inv, Units buffer) {
  HospitalObservation o;
  o.agent = {AgentClass::hospital, 0, 0};
  o.inventory = {inv, inv, inv};
  o.pipeline = {0, 0, 0};
  o.buffer_target = {buffer, buffer, buffer};
  o.backlog = {0, 0, 0};
  o.criticality_weight = {1.0, 0.8, 0.6};
  o.forecast = {10.0, 8.0, 6.0};
  return o;
}
}  // namespace

TEST_CASE("hospital decide") {
  const auto full = hospital_decide(hospital_obs(100, 100));
  CHECK(full.orders == std::vector<Units>{0, 0, 0});
  const auto empty = hospital_decide(hospital_obs(0, 100));
  CHECK(empty.orders == std::vector<Units>{100, 100, 100});
  CHECK(empty.criticality[0] == 1.0);
  CHECK(empty.criticality[2] == doctest::Approx(0.6));
  CHECK(empty.forecast == std::vector<double>{10.0, 8.0, 6.0});

  auto backlogged = hospital_obs(20, 100);
  backlogged.backlog = {15, 0, 0};
  CHECK(hospital_decide(backlogged).orders == std::vector<Units>{95, 80, 80});

  const auto again = hospital_decide(hospital_obs(0, 100));
  CHECK(again.orders == empty.orders);
  CHECK(again.criticality == empty.criticality);
}

namespace {
DistributorObservation distributor_obs(Units inv, std::vector<Units> orders, std::vector<double> crit) {
  DistributorObservation o;
  o.agent = {AgentClass::distributor, 0, 0};
  o.inventory = {inv};
  o.pipeline = {0};
  for (std::size_t k = 0; k < orders.size(); ++k)
    o.orders.push_back({{AgentClass::hospital, static_cast<int>(k), 0}, {orders[k]}, {0.0}, {crit[k]}});
  return o;
}
}  // namespace

TEST_CASE("distributor decide") {
  auto abundant = distributor_decide(distributor_obs(500, {100, 200}, {0.0, 0.5}));
  CHECK(abundant.shipments[0][0] == 100);
  CHECK(abundant.shipments[1][0] == 200);

  auto starved = distributor_decide(distributor_obs(0, {100, 200}, {0.0, 0.5}));
  CHECK(starved.shipments[0][0] == 0);
  CHECK(starved.shipments[1][0] == 0);

  auto rationed = distributor_decide(distributor_obs(100, {100, 100}, {1.0, 0.0}));
  // Weights 2:1 through the largest-remainder oracle.
  const auto oracle = largest_remainder_oracle({2.0L, 1.0L}, 100);
  CHECK(rationed.shipments[0][0] == oracle[0]);
  CHECK(rationed.shipments[1][0] == oracle[1]);
  CHECK(oracle == std::vector<Units>{67, 33});
}

TEST_CASE("distributor decide: feasibility and cap respect over fuzzed inputs") {
  RandomStream rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 5;
    std::vector<Units> orders(n);
    std::vector<double> crit(n);
    for (std::size_t k = 0; k < n; ++k) {
      orders[k] = static_cast<Units>(rng.next_u64() % 300);
      crit[k] = rng.uniform();
    }
    const Units inv = static_cast<Units>(rng.next_u64() % 600);
    const auto out = distributor_decide(distributor_obs(inv, orders, crit));
    Units shipped = 0;
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(out.shipments[k][0] >= 0);
      CHECK(out.shipments[k][0] <= orders[k]);
      shipped += out.shipments[k][0];
    }
    CHECK(shipped <= inv);
    CHECK(shipped == std::min(inv, sum(orders)));
  }
}

namespace {
ManufacturerObservation manufacturer_obs(std::vector<double> severity, double alpha, double eps,
                                         Units supply, std::vector<Units> demand) {
  ManufacturerObservation o;
  o.agent = {AgentClass::manufacturer, 0, -1};
  o.available = {supply};
  o.production = {0};
  o.severity = severity;
  o.regional_cases.assign(severity.size(), 0.0);
  for (std::size_t r = 0; r < severity.size(); ++r)
    o.demand.push_back({{AgentClass::distributor, static_cast<int>(r), static_cast<int>(r)},
                        static_cast<int>(r), {demand[r]}, false});
  o.alpha = alpha;
  o.epsilon = eps;
  return o;
}

std::vector<Units> column(const ManufacturerDecision& d) {
  std::vector<Units> out;
  for (const auto& row : d.allocation) out.push_back(row[0]);
  return out;
}
}  // namespace

TEST_CASE("manufacturer decide examples") {
  const auto none = manufacturer_decide(manufacturer_obs({0.1, 0.2, 0.3}, 15, 0.05, 800, {0, 0, 0}));
  CHECK(column(none) == std::vector<Units>{0, 0, 0});

  const auto uniform =
      manufacturer_decide(manufacturer_obs({0.2, 0.2, 0.2}, 37, 0.05, 900, {5000, 5000, 5000}));
  CHECK(column(uniform) == std::vector<Units>{300, 300, 300});

  // Independent pipeline: softmax, then floor (non-binding here), then largest remainder.
  const std::vector<double> s{0.05, 0.02, 0.01};
  const auto got = manufacturer_decide(manufacturer_obs(s, 20, 0.05, 1000, {10000, 10000, 10000}));
  const auto oracle = largest_remainder_oracle(softmax_oracle(s, 20), 1000);
  for (Units x : oracle) REQUIRE(x >= 50);
  CHECK(column(got) == oracle);
  CHECK(oracle == std::vector<Units>{500, 275, 225});
}

TEST_CASE("manufacturer decide: disruption and demand caps") {
  auto obs = manufacturer_obs({0.3, 0.1, 0.0}, 15, 0.05, 1000, {100, 100, 100});
  obs.disrupted = true;
  CHECK(column(manufacturer_decide(obs)) == std::vector<Units>{0, 0, 0});

  // Low demand everywhere: every region capped, leftover kept by the manufacturer.
  const auto capped = manufacturer_decide(manufacturer_obs({0.3, 0.1, 0.0}, 15, 0.05, 1000, {100, 50, 20}));
  CHECK(column(capped) == std::vector<Units>{100, 50, 20});

  // One small region: its cut-off share is re-spread over the others.
  const auto spread = manufacturer_decide(manufacturer_obs({0.2, 0.2, 0.2}, 5, 0.0, 900, {100, 1000, 1000}));
  CHECK(column(spread) == std::vector<Units>{100, 400, 400});
}

TEST_CASE("tool properties over fuzzed inputs") {
  RandomStream rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t regions = 1 + rng.next_u64() % 6;
    std::vector<double> s(regions);
    for (auto& x : s) x = rng.uniform() * 0.5;
    const double alpha = rng.uniform() * 30.0;
    const Units q = static_cast<Units>(rng.next_u64() % 20000);

    const auto a = tool_allocation_engine(s, alpha, q);
    CHECK(sum(a) == q);
    CHECK(a == tool_allocation_engine(s, alpha, q));

    // Shift invariance, checked at the integer output.
    const double shift = (rng.uniform() - 0.5) * 20.0;
    std::vector<double> shifted = s;
    for (auto& x : shifted) x += shift;
    CHECK(tool_allocation_engine(shifted, alpha, q) == a);

    // Monotone priority.
    if (alpha > 0.0)
      for (std::size_t i = 0; i < regions; ++i)
        for (std::size_t j = 0; j < regions; ++j)
          if (s[i] > s[j]) CHECK(a[i] >= a[j]);

    const double eps = rng.uniform() / static_cast<double>(regions);
    const auto f = tool_fairness_floor(a, eps, q);
    CHECK(sum(f) == q);
    CHECK(*std::min_element(f.begin(), f.end()) >= min_support_floor(eps, q));
  }
}
