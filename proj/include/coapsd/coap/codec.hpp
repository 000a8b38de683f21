#pragma once

#include "coapsd/coap/message.hpp"

#include <span>
#include <stdexcept>
#include <string>

namespace coapsd::coap {

// Raised by encode() for messages that break a CoapMessage invariant.
class InvariantViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class DecodeErrc {
    None,
    TooShort,
    BadVersion,
    BadTokenLength,
    Truncated,
    BadOption,
    BadEmptyMessage,
    EmptyPayload,
};

auto to_string(DecodeErrc e) -> std::string_view;

// Result of decode(): a message, or the reason the frame is malformed.
struct DecodeResult {
    std::optional<Message> message;
    DecodeErrc error{DecodeErrc::None};
    std::string detail;

    explicit operator bool() const { return message.has_value(); }
    auto operator*() const -> const Message& { return *message; }
    auto operator->() const -> const Message* { return &*message; }
};

// RFC 7252 framing, version 1. Options are written in ascending number order.
auto encode(const Message& msg) -> Bytes;

// Never throws; any byte string yields either a message or a DecodeErrc.
auto decode(std::span<const std::uint8_t> frame) -> DecodeResult;

// Checks the invariants encode() enforces without building the frame.
void validate(const Message& msg);

} // namespace coapsd::coap
