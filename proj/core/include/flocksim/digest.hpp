#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flocksim {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr Digest kZeroDigest{};

Digest sha256(std::span<const std::uint8_t> data);

std::string to_hex(const Digest& d);
Digest digest_from_hex(const std::string& hex);  // throws on malformed input

// Canonical byte image of a parameter vector: 64-bit IEEE doubles,
// little-endian, in index order.
std::vector<std::uint8_t> le_bytes(std::span<const double> values);

}  // namespace flocksim
