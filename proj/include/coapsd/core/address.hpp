#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace coapsd {

// IPv6 address, stored in network byte order.
class Address {
public:
    using bytes_type = std::array<std::uint8_t, 16>;

    constexpr Address() = default;
    constexpr explicit Address(const bytes_type& bytes) : bytes_{bytes} {}

    // Accepts any textual form inet_pton understands.
    static auto parse(std::string_view text) -> std::optional<Address>;
    // Throws std::invalid_argument on bad input.
    static auto from_string(std::string_view text) -> Address;

    // RFC 5952 canonical text form.
    auto to_string() const -> std::string;

    constexpr auto bytes() const -> const bytes_type& { return bytes_; }

    auto operator<=>(const Address&) const = default;

private:
    bytes_type bytes_{};
};

struct Endpoint {
    Address addr;
    std::uint16_t port{0};

    // "[addr]:port"
    auto to_string() const -> std::string;

    auto operator<=>(const Endpoint&) const = default;
};

class Prefix {
public:
    Prefix() = default;
    Prefix(const Address& network, unsigned length);

    // "aaaa::/64"
    static auto parse(std::string_view text) -> std::optional<Prefix>;

    auto contains(const Address& addr) const -> bool;
    auto network() const -> const Address& { return network_; }
    auto length() const -> unsigned { return length_; }
    auto to_string() const -> std::string;

    auto operator==(const Prefix&) const -> bool = default;

private:
    Address network_;
    unsigned length_{0};
};

inline constexpr std::uint16_t coap_default_port = 5683;

} // namespace coapsd

template <>
struct std::hash<coapsd::Address> {
    auto operator()(const coapsd::Address& a) const noexcept -> std::size_t {
        std::size_t h = 1469598103934665603ull;
        for (auto b : a.bytes()) {
            h = (h ^ b) * 1099511628211ull;
        }
        return h;
    }
};

template <>
struct std::hash<coapsd::Endpoint> {
    auto operator()(const coapsd::Endpoint& e) const noexcept -> std::size_t {
        return std::hash<coapsd::Address>{}(e.addr) * 31u + e.port;
    }
};
