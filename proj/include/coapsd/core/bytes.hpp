#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coapsd {

using Bytes = std::vector<std::uint8_t>;

inline auto to_bytes(std::string_view s) -> Bytes {
    return Bytes(s.begin(), s.end());
}

inline auto to_text(std::span<const std::uint8_t> b) -> std::string {
    return std::string(b.begin(), b.end());
}

// Lowercase hex without separators. Empty input gives "".
auto to_hex(std::span<const std::uint8_t> b) -> std::string;

// Accepts an optional "0x" prefix. Returns nullopt on odd length or non-hex digits.
auto from_hex(std::string_view hex) -> std::optional<Bytes>;

} // namespace coapsd
