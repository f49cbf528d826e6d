#pragma once

#include <cstdint>

namespace medsim::scenario {

struct SIRParams {
  double beta = 0.3;    // infection rate per day
  double gamma = 0.1;   // recovery rate per day
  std::int64_t population = 10000;
  double initial_infected = 10.0;
};

struct SIRState {
  double s = 0.0;
  double i = 0.0;
  double r = 0.0;

  double total() const { return s + i + r; }
};

/// Largest internal RK4 step, in days.
inline constexpr double kMaxSirSubstep = 0.25;

/// Baseline infection rate at pandemic severity 1.0; severity scales it linearly.
inline constexpr double kBaselineBeta = 0.375;

/// Throws ConfigError when the parameters break their invariants.
void validate(const SIRParams& params);

SIRState initial_state(const SIRParams& params);

/// Advances `state` by `dt` days with fixed-step RK4 (substep <= 0.25 day).
/// Components are clamped at zero on return. Throws ConfigError on non-finite
/// input or dt <= 0.
SIRState integrate_sir(const SIRParams& params, const SIRState& state, double dt);

}  // namespace medsim::scenario
