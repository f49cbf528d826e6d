#include "medsim/scenario/sir.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "medsim/core/types.hpp"

namespace medsim::scenario {

void validate(const SIRParams& p) {
  if (!std::isfinite(p.beta) || p.beta < 0.0) throw ConfigError("sir_params.beta must be >= 0");
  if (!std::isfinite(p.gamma) || p.gamma < 0.0)
    throw ConfigError("sir_params.gamma must be >= 0");
  if (p.population <= 0) throw ConfigError("sir_params.population must be positive");
  if (!std::isfinite(p.initial_infected) || p.initial_infected < 0.0 ||
      p.initial_infected > static_cast<double>(p.population)) {
    throw ConfigError("sir_params.initial_infected must lie in [0, population]");
  }
}

SIRState initial_state(const SIRParams& p) {
  const double n = static_cast<double>(p.population);
  return {n - p.initial_infected, p.initial_infected, 0.0};
}

namespace {

struct Rates {
  double ds, di, dr;
};

Rates derivative(const SIRParams& p, double n, double s, double i) {
  const double infection = p.beta * s * i / n;
  const double recovery = p.gamma * i;
  return {-infection, infection - recovery, recovery};
}

}  // namespace

SIRState integrate_sir(const SIRParams& params, const SIRState& state, double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) throw ConfigError("integrate_sir: dt must be positive");
  if (!std::isfinite(state.s) || !std::isfinite(state.i) || !std::isfinite(state.r) ||
      !std::isfinite(params.beta) || !std::isfinite(params.gamma)) {
    throw ConfigError("integrate_sir: non-finite input");
  }
  if (params.population <= 0) throw ConfigError("integrate_sir: population must be positive");

  const double n = static_cast<double>(params.population);
  const int steps = static_cast<int>(std::ceil(dt / kMaxSirSubstep - 1e-12));
  const double h = dt / steps;

  double s = state.s, i = state.i, r = state.r;
  for (int k = 0; k < steps; ++k) {
    const Rates k1 = derivative(params, n, s, i);
    const Rates k2 = derivative(params, n, s + 0.5 * h * k1.ds, i + 0.5 * h * k1.di);
    const Rates k3 = derivative(params, n, s + 0.5 * h * k2.ds, i + 0.5 * h * k2.di);
    const Rates k4 = derivative(params, n, s + h * k3.ds, i + h * k3.di);
    s += h / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
    i += h / 6.0 * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di);
    r += h / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
  }
  return {std::max(s, 0.0), std::max(i, 0.0), std::max(r, 0.0)};
}

}  // namespace medsim::scenario
