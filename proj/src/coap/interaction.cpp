#include "coapsd/coap/interaction.hpp"

namespace coapsd::coap {

auto to_string(InteractionKind k) -> std::string_view {
    switch (k) {
    case InteractionKind::PutRequest: return "PutRequest";
    case InteractionKind::ObserveRegister: return "ObserveRegister";
    case InteractionKind::ObserveDeregister: return "ObserveDeregister";
    case InteractionKind::BindingRequest: return "BindingRequest";
    case InteractionKind::DeployBlock: return "DeployBlock";
    case InteractionKind::Notification: return "Notification";
    case InteractionKind::ResetSignal: return "ResetSignal";
    case InteractionKind::AckSignal: return "AckSignal";
    case InteractionKind::Other: return "Other";
    }
    return "?";
}

auto classify(const Message& msg) -> InteractionKind {
    const auto& o = msg.options;
    if (msg.type == MessageType::Reset) {
        return InteractionKind::ResetSignal;
    }
    if (msg.type == MessageType::Acknowledgement && msg.code == Code::Empty) {
        return InteractionKind::AckSignal;
    }
    switch (msg.code) {
    case Code::Get:
        if (o.observe && o.binding) return InteractionKind::BindingRequest;
        if (o.observe && *o.observe == 1) return InteractionKind::ObserveDeregister;
        if (o.observe) return InteractionKind::ObserveRegister;
        return InteractionKind::Other;
    case Code::Put:
        return o.block1 ? InteractionKind::DeployBlock : InteractionKind::PutRequest;
    case Code::Post:
        return o.block1 ? InteractionKind::DeployBlock : InteractionKind::Other;
    default:
        break;
    }
    if (msg.is_response() && o.observe) {
        return InteractionKind::Notification;
    }
    return InteractionKind::Other;
}

auto registration_request(MessageId mid, Token token) -> Message {
    Message m;
    m.type = MessageType::Confirmable;
    m.code = Code::Post;
    m.mid = mid;
    m.token = std::move(token);
    m.options.set_path(registration_path);
    return m;
}

auto is_registration(const Message& msg) -> bool {
    return msg.code == Code::Post && msg.options.path() == registration_path;
}

} // namespace coapsd::coap
