#pragma once

#include "coapsd/coap/message.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace testsupport {

using namespace coapsd;

inline auto random_bytes(std::mt19937_64& rng, std::size_t max_len) -> Bytes {
    Bytes b(rng() % (max_len + 1));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

inline auto random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len)
    -> std::string {
    static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789-_.=";
    std::string s(min_len + rng() % (max_len - min_len + 1), 'a');
    for (auto& c : s) c = alphabet[rng() % (sizeof(alphabet) - 1)];
    return s;
}

// A random message satisfying every encode() precondition.
inline auto random_message(std::mt19937_64& rng) -> coap::Message {
    using namespace coap;
    Message m;
    m.type = static_cast<MessageType>(rng() % 4);
    m.mid = static_cast<MessageId>(rng());
    if (rng() % 10 == 0) {
        m.code = Code::Empty;
        return m;
    }
    do {
        m.code = static_cast<Code>(rng() % 256);
    } while (m.code == Code::Empty || (static_cast<unsigned>(m.code) >> 5) == 1 ||
             (static_cast<unsigned>(m.code) >> 5) == 6 || (static_cast<unsigned>(m.code) >> 5) == 7);
    m.token = random_bytes(rng, max_token_length);
    auto& o = m.options;
    for (auto n = rng() % 4; n > 0; --n) o.uri_path.push_back(random_text(rng, 0, 12));
    for (auto n = rng() % 3; n > 0; --n) o.uri_query.push_back(random_text(rng, 1, 20));
    if (rng() % 2) o.observe = static_cast<std::uint32_t>(rng() % (max_observe_value + 1));
    if (rng() % 3 == 0) {
        o.block1 = BlockOption{static_cast<std::uint32_t>(rng() % (1u << 20)), rng() % 2 == 0,
                               static_cast<std::uint16_t>(16u << (rng() % 7))};
    }
    if (rng() % 3 == 0) o.max_age = static_cast<std::uint32_t>(rng());
    if (rng() % 3 == 0) o.content_format = static_cast<std::uint16_t>(rng());
    if (rng() % 4 == 0) {
        BindingInfo b;
        Address::bytes_type raw{};
        for (auto& x : raw) x = static_cast<std::uint8_t>(rng());
        b.dest_addr = Address{raw};
        b.dest_resource = random_text(rng, 1, 16);
        b.pmin = static_cast<std::uint32_t>(rng() % 1000);
        b.pmax = b.pmin + static_cast<std::uint32_t>(rng() % 1000);
        o.binding = b;
    }
    std::set<std::uint16_t> numbers;
    for (auto n = rng() % 4; n > 0; --n) {
        std::uint16_t num = 0;
        do {
            // Mix small numbers with ones that need 1- and 2-byte extended deltas.
            switch (rng() % 3) {
            case 0: num = static_cast<std::uint16_t>(rng() % 13); break;
            case 1: num = static_cast<std::uint16_t>(13 + rng() % 256); break;
            default: num = static_cast<std::uint16_t>(rng()); break;
            }
        } while (num == 0 || option::is_typed(num));
        numbers.insert(num);
    }
    for (auto num : numbers) o.other.push_back({num, random_bytes(rng, rng() % 8 == 0 ? 400 : 10)});
    if (rng() % 2) {
        m.payload = random_bytes(rng, 64);
    }
    return m;
}

} // namespace testsupport
