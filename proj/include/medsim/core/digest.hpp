#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medsim {

using Bytes = std::vector<std::uint8_t>;

/// 32-byte SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest zero() { return {}; }
  std::string hex() const;

  friend bool operator==(const Digest&, const Digest&) = default;
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

/// HMAC-SHA256 authentication tag.
Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);

std::string to_hex(std::span<const std::uint8_t> data);

/// Strict lowercase hex decoding; uppercase digits are rejected so that every
/// digest has exactly one textual form.
std::optional<Bytes> from_hex(std::string_view text);
std::optional<Digest> parse_digest(std::string_view text);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace medsim
