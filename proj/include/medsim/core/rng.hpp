#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace medsim {

/// Derives an independent sub-stream seed from (root seed, purpose tag, coordinates).
/// The mapping is a pure function, so draws never depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                          std::initializer_list<std::uint64_t> coords);

/// Seeded random stream with platform-independent draws.
///
/// std::mt19937_64 output is fixed by the standard; the distribution transforms
/// below are written out by hand because the std:: distributions are not.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

  /// Standard normal via Box-Muller; always consumes exactly two raw draws.
  double standard_normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace medsim
