#pragma once

#include "coapsd/core/address.hpp"
#include "coapsd/core/bytes.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coapsd::coap {

enum class MessageType : std::uint8_t {
    Confirmable = 0,
    NonConfirmable = 1,
    Acknowledgement = 2,
    Reset = 3,
};

// Any 8-bit code is representable; the named values are the ones this project produces.
enum class Code : std::uint8_t {
    Empty = 0x00,
    Get = 0x01,
    Post = 0x02,
    Put = 0x03,
    Delete = 0x04,
    Created = 0x41,  // 2.01
    Deleted = 0x42,  // 2.02
    Valid = 0x43,    // 2.03
    Changed = 0x44,  // 2.04
    Content = 0x45,  // 2.05
    Continue = 0x5F, // 2.31
    BadRequest = 0x80,
    NotFound = 0x84,
    MethodNotAllowed = 0x85,
    RequestEntityIncomplete = 0x88,
    InternalServerError = 0xA0,
};

constexpr auto code_class(Code c) -> unsigned { return static_cast<unsigned>(c) >> 5; }
constexpr auto code_detail(Code c) -> unsigned { return static_cast<unsigned>(c) & 0x1F; }
constexpr auto is_request(Code c) -> bool { return code_class(c) == 0 && c != Code::Empty; }
constexpr auto is_response(Code c) -> bool { return code_class(c) >= 2 && code_class(c) <= 5; }

auto to_string(MessageType t) -> std::string_view;
// "GET", "2.05", ...
auto to_string(Code c) -> std::string;

using MessageId = std::uint16_t;
using Token = Bytes;

inline constexpr std::size_t max_token_length = 8;
inline constexpr std::uint32_t max_observe_value = 0xFFFFFF;

namespace option {
inline constexpr std::uint16_t observe = 6;
inline constexpr std::uint16_t uri_path = 11;
inline constexpr std::uint16_t content_format = 12;
inline constexpr std::uint16_t max_age = 14;
inline constexpr std::uint16_t uri_query = 15;
inline constexpr std::uint16_t block1 = 27;
// Binding options live in the experimental elective range.
inline constexpr std::uint16_t bind_dest_addr = 2048;
inline constexpr std::uint16_t bind_dest_resource = 2050;
inline constexpr std::uint16_t bind_pmin = 2052;
inline constexpr std::uint16_t bind_pmax = 2054;

// Numbers decoded into typed OptionSet fields. Raw options may not use them.
auto is_typed(std::uint16_t number) -> bool;
} // namespace option

struct BlockOption {
    std::uint32_t num{0}; // < 2^20
    bool more{false};
    std::uint16_t size{16}; // power of two, 16..1024

    static constexpr auto valid_size(std::uint32_t s) -> bool {
        return s >= 16 && s <= 1024 && (s & (s - 1)) == 0;
    }
    auto operator==(const BlockOption&) const -> bool = default;
};

struct BindingInfo {
    Address dest_addr;
    std::string dest_resource;
    std::uint32_t pmin{0}; // seconds
    std::uint32_t pmax{0}; // seconds

    auto operator==(const BindingInfo&) const -> bool = default;
};

// An option this codec does not interpret; carried through opaquely.
struct RawOption {
    std::uint16_t number{0};
    Bytes value;

    auto operator==(const RawOption&) const -> bool = default;
};

struct OptionSet {
    std::vector<std::string> uri_path;
    std::vector<std::string> uri_query;
    std::optional<std::uint32_t> observe;
    std::optional<BlockOption> block1;
    std::optional<std::uint32_t> max_age;
    std::optional<std::uint16_t> content_format;
    std::optional<BindingInfo> binding;
    std::vector<RawOption> other; // ascending by number

    // Uri-Path segments joined with '/', no leading slash.
    auto path() const -> std::string;
    void set_path(std::string_view path);
    // Value of the first "key=value" Uri-Query entry with this key.
    auto query_value(std::string_view key) const -> std::optional<std::string>;

    auto empty() const -> bool;

    auto operator==(const OptionSet&) const -> bool = default;
};

struct Message {
    MessageType type{MessageType::Confirmable};
    Code code{Code::Empty};
    MessageId mid{0};
    Token token;
    OptionSet options;
    Bytes payload;

    auto is_request() const -> bool { return coap::is_request(code); }
    auto is_response() const -> bool { return coap::is_response(code); }

    // One-line human-readable summary for logs and traces.
    auto summary() const -> std::string;

    auto operator==(const Message&) const -> bool = default;
};

// Normalizes "/a/lb/" and "a/lb" to "a/lb".
auto normalize_path(std::string_view path) -> std::string;

// Builders for the common message shapes.
auto make_empty_ack(MessageId mid) -> Message;
auto make_reset(MessageId mid) -> Message;
auto make_piggybacked(const Message& request, Code code) -> Message;

} // namespace coapsd::coap
