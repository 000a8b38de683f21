#pragma once

// Minimal CoAP frame dissector written straight from the RFC 7252 layout. It shares no
// code with the library codec and serves as an oracle in tests.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace refdis {

struct Frame {
    int version{0};
    int type{0};
    int code{0};
    int mid{0};
    std::vector<std::uint8_t> token;
    std::vector<std::pair<unsigned, std::vector<std::uint8_t>>> options; // in wire order
    std::vector<std::uint8_t> payload;

    auto option_uint(unsigned number) const -> std::optional<std::uint64_t> {
        for (const auto& [n, v] : options) {
            if (n != number) continue;
            std::uint64_t x = 0;
            for (auto b : v) x = (x << 8) | b;
            return x;
        }
        return std::nullopt;
    }
};

inline auto dissect(const std::vector<std::uint8_t>& b) -> std::optional<Frame> {
    if (b.size() < 4) return std::nullopt;
    Frame f;
    f.version = b[0] >> 6;
    f.type = (b[0] >> 4) & 3;
    const int tkl = b[0] & 15;
    f.code = b[1];
    f.mid = (b[2] << 8) | b[3];
    if (f.version != 1 || tkl > 8) return std::nullopt;
    std::size_t i = 4;
    if (b.size() < i + tkl) return std::nullopt;
    f.token.assign(b.begin() + 4, b.begin() + 4 + tkl);
    i += tkl;
    unsigned number = 0;
    auto ext = [&](unsigned nib, unsigned& out) -> bool {
        if (nib < 13) {
            out = nib;
        } else if (nib == 13) {
            if (i + 1 > b.size()) return false;
            out = 13u + b[i];
            i += 1;
        } else if (nib == 14) {
            if (i + 2 > b.size()) return false;
            out = 269u + ((unsigned{b[i]} << 8) | b[i + 1]);
            i += 2;
        } else {
            return false;
        }
        return true;
    };
    while (i < b.size()) {
        if (b[i] == 0xFF) {
            ++i;
            if (i == b.size()) return std::nullopt;
            f.payload.assign(b.begin() + static_cast<long>(i), b.end());
            return f;
        }
        const unsigned dn = b[i] >> 4;
        const unsigned ln = b[i] & 15;
        ++i;
        unsigned delta = 0;
        unsigned len = 0;
        if (!ext(dn, delta) || !ext(ln, len)) return std::nullopt;
        if (i + len > b.size()) return std::nullopt;
        number += delta;
        f.options.emplace_back(number, std::vector<std::uint8_t>(b.begin() + static_cast<long>(i),
                                                                 b.begin() + static_cast<long>(i + len)));
        i += len;
    }
    return f;
}

} // namespace refdis
