#include "coapsd/coap/message.hpp"

#include <fmt/format.h>

namespace coapsd::coap {

auto to_string(MessageType t) -> std::string_view {
    switch (t) {
    case MessageType::Confirmable: return "CON";
    case MessageType::NonConfirmable: return "NON";
    case MessageType::Acknowledgement: return "ACK";
    case MessageType::Reset: return "RST";
    }
    return "?";
}

auto to_string(Code c) -> std::string {
    switch (c) {
    case Code::Empty: return "EMPTY";
    case Code::Get: return "GET";
    case Code::Post: return "POST";
    case Code::Put: return "PUT";
    case Code::Delete: return "DELETE";
    default: break;
    }
    return fmt::format("{}.{:02d}", code_class(c), code_detail(c));
}

namespace option {
auto is_typed(std::uint16_t number) -> bool {
    switch (number) {
    case observe:
    case uri_path:
    case content_format:
    case max_age:
    case uri_query:
    case block1:
    case bind_dest_addr:
    case bind_dest_resource:
    case bind_pmin:
    case bind_pmax:
        return true;
    default:
        return false;
    }
}
} // namespace option

auto normalize_path(std::string_view path) -> std::string {
    while (path.starts_with('/')) path.remove_prefix(1);
    while (path.ends_with('/')) path.remove_suffix(1);
    return std::string{path};
}

auto OptionSet::path() const -> std::string {
    std::string out;
    for (std::size_t i = 0; i < uri_path.size(); ++i) {
        if (i) out.push_back('/');
        out += uri_path[i];
    }
    return out;
}

void OptionSet::set_path(std::string_view path) {
    uri_path.clear();
    auto p = normalize_path(path);
    if (p.empty()) return;
    std::size_t start = 0;
    while (true) {
        auto slash = p.find('/', start);
        uri_path.emplace_back(p.substr(start, slash - start));
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
}

auto OptionSet::query_value(std::string_view key) const -> std::optional<std::string> {
    for (const auto& q : uri_query) {
        std::string_view sv{q};
        if (sv.size() > key.size() && sv.starts_with(key) && sv[key.size()] == '=') {
            return std::string{sv.substr(key.size() + 1)};
        }
    }
    return std::nullopt;
}

auto OptionSet::empty() const -> bool {
    return uri_path.empty() && uri_query.empty() && !observe && !block1 && !max_age &&
           !content_format && !binding && other.empty();
}

auto Message::summary() const -> std::string {
    std::string s = fmt::format("{}-{} mid={} tok={}", to_string(type), to_string(code), mid,
                                token.empty() ? std::string{"-"} : to_hex(token));
    if (!options.uri_path.empty()) s += " /" + options.path();
    for (const auto& q : options.uri_query) s += " ?" + q;
    if (options.observe) s += fmt::format(" obs={}", *options.observe);
    if (options.block1) {
        s += fmt::format(" b1={}/{}/{}", options.block1->num, options.block1->more ? 1 : 0,
                         options.block1->size);
    }
    if (options.max_age) s += fmt::format(" max-age={}", *options.max_age);
    if (options.content_format) s += fmt::format(" cf={}", *options.content_format);
    if (options.binding) {
        s += fmt::format(" bind={}/{} pmin={} pmax={}", options.binding->dest_addr.to_string(),
                         options.binding->dest_resource, options.binding->pmin,
                         options.binding->pmax);
    }
    if (!payload.empty()) s += fmt::format(" len={}", payload.size());
    return s;
}

auto make_empty_ack(MessageId mid) -> Message {
    Message m;
    m.type = MessageType::Acknowledgement;
    m.code = Code::Empty;
    m.mid = mid;
    return m;
}

auto make_reset(MessageId mid) -> Message {
    Message m;
    m.type = MessageType::Reset;
    m.code = Code::Empty;
    m.mid = mid;
    return m;
}

auto make_piggybacked(const Message& request, Code code) -> Message {
    Message m;
    m.type = MessageType::Acknowledgement;
    m.code = code;
    m.mid = request.mid;
    m.token = request.token;
    return m;
}

} // namespace coapsd::coap
