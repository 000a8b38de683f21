#include "coapsd/core/address.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <stdexcept>

namespace coapsd {

auto Address::parse(std::string_view text) -> std::optional<Address> {
    if (text.size() >= INET6_ADDRSTRLEN) {
        return std::nullopt;
    }
    std::string buf{text};
    bytes_type bytes{};
    if (::inet_pton(AF_INET6, buf.c_str(), bytes.data()) != 1) {
        return std::nullopt;
    }
    return Address{bytes};
}

auto Address::from_string(std::string_view text) -> Address {
    auto a = parse(text);
    if (!a) {
        throw std::invalid_argument("invalid IPv6 address: " + std::string{text});
    }
    return *a;
}

auto Address::to_string() const -> std::string {
    char buf[INET6_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
    return buf;
}

auto Endpoint::to_string() const -> std::string {
    return "[" + addr.to_string() + "]:" + std::to_string(port);
}

Prefix::Prefix(const Address& network, unsigned length) : length_{length > 128 ? 128 : length} {
    auto bytes = network.bytes();
    for (unsigned i = 0; i < 16; ++i) {
        const unsigned bit = i * 8;
        if (bit >= length_) {
            bytes[i] = 0;
        } else if (bit + 8 > length_) {
            bytes[i] &= static_cast<std::uint8_t>(0xFFu << (8 - (length_ - bit)));
        }
    }
    network_ = Address{bytes};
}

auto Prefix::parse(std::string_view text) -> std::optional<Prefix> {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return std::nullopt;
    }
    auto addr = Address::parse(text.substr(0, slash));
    unsigned len = 0;
    auto lenText = text.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(lenText.data(), lenText.data() + lenText.size(), len);
    if (!addr || ec != std::errc{} || ptr != lenText.data() + lenText.size() || len > 128) {
        return std::nullopt;
    }
    return Prefix{*addr, len};
}

auto Prefix::contains(const Address& addr) const -> bool {
    return Prefix{addr, length_}.network_ == network_;
}

auto Prefix::to_string() const -> std::string {
    return network_.to_string() + "/" + std::to_string(length_);
}

} // namespace coapsd
