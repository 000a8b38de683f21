#pragma once

#include "coapsd/coap/message.hpp"

#include <string_view>

namespace coapsd::coap {

// What an intercepted message means for dynamic state on a node.
enum class InteractionKind {
    PutRequest,
    ObserveRegister,
    ObserveDeregister,
    BindingRequest,
    DeployBlock,
    Notification,
    ResetSignal,
    AckSignal,
    Other,
};

auto to_string(InteractionKind k) -> std::string_view;

// Total and deterministic. BindingRequest takes precedence over ObserveRegister.
auto classify(const Message& msg) -> InteractionKind;

inline constexpr std::string_view registration_path = "sd/register";

// CON POST to the gateway's registration resource. The node's address travels
// as the datagram source, not inside the message.
auto registration_request(MessageId mid, Token token = {}) -> Message;

auto is_registration(const Message& msg) -> bool;

} // namespace coapsd::coap
