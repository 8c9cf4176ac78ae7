#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace asbox {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr Digest kZeroDigest{};

// SHA-256.
Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

std::string to_hex(const Digest& d);
// Throws RangeError unless `hex` is 64 lowercase hex characters.
Digest digest_from_hex(std::string_view hex);

}  // namespace asbox
