#pragma once

#include <span>
#include <vector>

#include "medsim/core/types.hpp"

namespace medsim {

/// Splits `total` integer units in proportion to `weights` (largest-remainder
/// method). The result sums to `total` exactly whenever some weight is positive;
/// with all-zero weights every entry is zero.
///
/// Remainder ties go to the lowest index. When `tie_priority` is given, ties are
/// broken first by the smaller priority value and only then by index.
std::vector<Units> largest_remainder(std::span<const double> weights, Units total,
                                     std::span<const Units> tie_priority = {});

/// Proportional split of `total` where entry i never exceeds caps[i]. Surplus
/// cut off by a cap is re-split among the still-uncapped entries until nothing
/// is left or every entry is capped. Ties in each re-split go to the entry with
/// fewer units so far, keeping equal-weight entries within one unit.
std::vector<Units> capped_proportional(std::span<const double> weights,
                                       std::span<const Units> caps, Units total);

/// Adds `extra` units on top of `base` in proportion to `weights`, capping each
/// entry at caps[i]. Returns the final allocation; units that no entry can
/// absorb are left out (the sum may be below base + extra).
std::vector<Units> fill_to_caps(std::span<const double> weights, std::span<const Units> caps,
                                std::vector<Units> base, Units extra);

/// Guaranteed per-region minimum floor(ε·Q). A 1e-9 tolerance absorbs
/// products like 0.29 * 100 landing just under an integer.
Units min_support_floor(double epsilon, Units available);

}  // namespace medsim
