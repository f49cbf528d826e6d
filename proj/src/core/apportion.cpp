#include "medsim/core/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace medsim {

std::vector<Units> largest_remainder(std::span<const double> weights, Units total,
                                     std::span<const Units> tie_priority) {
  const std::size_t n = weights.size();
  std::vector<Units> out(n, 0);
  if (n == 0 || total <= 0) return out;

  double sum = 0.0;
  for (double w : weights) sum += std::max(w, 0.0);
  if (!(sum > 0.0)) return out;

  std::vector<double> frac(n, 0.0);
  Units assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = static_cast<double>(total) * (std::max(weights[i], 0.0) / sum);
    const double fl = std::floor(share);
    out[i] = static_cast<Units>(fl);
    frac[i] = share - fl;
    assigned += out[i];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    if (!tie_priority.empty() && tie_priority[a] != tie_priority[b])
      return tie_priority[a] < tie_priority[b];
    return a < b;
  });

  // Floating-point shares can land a hair off an integer boundary; settle the
  // exact total here so the identity sum == total never drifts.
  Units remaining = total - assigned;
  for (std::size_t k = 0; remaining > 0; k = (k + 1) % n) {
    if (weights[order[k]] > 0.0) {
      ++out[order[k]];
      --remaining;
    }
  }
  for (std::size_t k = n; remaining < 0;) {
    k = (k == 0 ? n : k) - 1;
    if (out[order[k]] > 0) {
      --out[order[k]];
      ++remaining;
    }
  }
  return out;
}

std::vector<Units> fill_to_caps(std::span<const double> weights, std::span<const Units> caps,
                                std::vector<Units> base, Units extra) {
  const std::size_t n = weights.size();
  Units remaining = extra;
  while (remaining > 0) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < n; ++i)
      if (base[i] < caps[i] && weights[i] > 0.0) open.push_back(i);
    if (open.empty()) break;

    std::vector<double> w;
    std::vector<Units> prio;
    for (std::size_t i : open) {
      w.push_back(weights[i]);
      prio.push_back(base[i]);
    }
    const auto split = largest_remainder(w, remaining, prio);
    for (std::size_t k = 0; k < open.size(); ++k) {
      const std::size_t i = open[k];
      const Units give = std::min(split[k], caps[i] - base[i]);
      base[i] += give;
      remaining -= give;
    }
  }
  return base;
}

std::vector<Units> capped_proportional(std::span<const double> weights,
                                       std::span<const Units> caps, Units total) {
  return fill_to_caps(weights, caps, std::vector<Units>(weights.size(), 0), total);
}

Units min_support_floor(double epsilon, Units available) {
  if (available <= 0 || epsilon <= 0.0) return 0;
  return static_cast<Units>(std::floor(epsilon * static_cast<double>(available) + 1e-9));
}

}  // namespace medsim
