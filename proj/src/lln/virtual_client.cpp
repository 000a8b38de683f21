#include "coapsd/lln/virtual_client.hpp"

#include "coapsd/coap/codec.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace coapsd::lln {

using coap::Code;
using coap::Message;
using coap::MessageType;

auto observe_is_fresh(std::uint32_t v1, SimTime t1, std::uint32_t v2, SimTime t2) -> bool {
    constexpr std::uint32_t half = 1u << 23;
    return (v1 < v2 && v2 - v1 < half) || (v1 > v2 && v1 - v2 > half) ||
           t2 > t1 + std::chrono::seconds{128};
}

VirtualClient::VirtualClient(Address addr, ClientEnv env, coap::TransmissionParams params)
    : addr_{addr},
      env_{std::move(env)},
      sender_{env_.scheduler, env_.rng, params,
              [this](const Datagram& dg) { env_.send(dg); }} {
    mid_counter_ = static_cast<coap::MessageId>(env_.rng() & 0xFFFF);
    port_counter_ = static_cast<std::uint16_t>(env_.rng() % 16000);
}

void VirtualClient::log(std::string_view line) const {
    if (env_.trace) env_.trace(fmt::format("client {} {}", addr_.to_string(), line));
}

auto VirtualClient::next_mid() -> coap::MessageId {
    return mid_counter_++;
}

auto VirtualClient::fresh_token() -> coap::Token {
    const auto r = env_.rng();
    return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(r >> 8),
            static_cast<std::uint8_t>(r >> 16), static_cast<std::uint8_t>(r >> 24)};
}

auto VirtualClient::fresh_port() -> std::uint16_t {
    port_counter_ = static_cast<std::uint16_t>((port_counter_ + 1) % 16000);
    return static_cast<std::uint16_t>(49152 + port_counter_);
}

auto VirtualClient::send_request(Message msg, const Endpoint& server, std::uint16_t port)
    -> RequestId {
    const auto id = next_request_++;
    msg.type = MessageType::Confirmable;
    msg.mid = next_mid();
    ReliableSender::Callbacks cb;
    cb.on_reply = [this, id](const Message& reply) {
        responses_.push_back({id, env_.scheduler.now(), reply.code, reply.payload});
    };
    cb.on_give_up = [this, id] { log(fmt::format("request {} timed out", id)); };
    sender_.send(Datagram{{addr_, port}, server, coap::encode(msg)}, msg.mid, std::move(cb));
    return id;
}

auto VirtualClient::put(const Address& server, const std::string& path, Bytes value,
                        std::optional<std::uint16_t> content_format) -> RequestId {
    Message msg;
    msg.code = Code::Put;
    msg.token = fresh_token();
    msg.options.set_path(path);
    msg.options.content_format = content_format;
    msg.payload = std::move(value);
    return send_request(std::move(msg), {server, coap_default_port}, fresh_port());
}

auto VirtualClient::get(const Address& server, const std::string& path) -> RequestId {
    Message msg;
    msg.code = Code::Get;
    msg.token = fresh_token();
    msg.options.set_path(path);
    return send_request(std::move(msg), {server, coap_default_port}, fresh_port());
}

auto VirtualClient::observe(const Address& server, const std::string& path,
                            std::optional<coap::Token> token) -> coap::Token {
    Observation obs;
    obs.server = {server, coap_default_port};
    obs.path = coap::normalize_path(path);
    obs.token = token ? *token : fresh_token();
    obs.local_port = fresh_port();
    observations_.push_back(obs);

    Message msg;
    msg.type = MessageType::Confirmable;
    msg.code = Code::Get;
    msg.mid = next_mid();
    msg.token = obs.token;
    msg.options.set_path(obs.path);
    msg.options.observe = 0;

    const auto id = next_request_++;
    const auto tok = obs.token;
    ReliableSender::Callbacks cb;
    cb.on_reply = [this, id, tok, server = obs.server](const Message& reply) {
        responses_.push_back({id, env_.scheduler.now(), reply.code, reply.payload});
        if (reply.options.observe && reply.token == tok) {
            on_notification(Datagram{server, {}, {}}, reply);
        }
    };
    sender_.send(Datagram{{addr_, obs.local_port}, obs.server, coap::encode(msg)}, msg.mid,
                 std::move(cb));
    return obs.token;
}

void VirtualClient::deregister(const coap::Token& token) {
    auto it = std::find_if(observations_.begin(), observations_.end(),
                           [&](const Observation& o) { return o.token == token; });
    if (it == observations_.end()) {
        log(fmt::format("deregister: no observation with token {}", to_hex(token)));
        return;
    }
    Message msg;
    msg.code = Code::Get;
    msg.token = token;
    msg.options.set_path(it->path);
    msg.options.observe = 1;
    const auto server = it->server;
    const auto port = it->local_port;
    observations_.erase(it);
    send_request(std::move(msg), server, port);
}

void VirtualClient::reset_on_next(const coap::Token& token) {
    for (auto& o : observations_) {
        if (o.token == token) o.reset_next = true;
    }
}

auto VirtualClient::bind(const Address& server, const std::string& path,
                         const coap::BindingInfo& binding) -> RequestId {
    Message msg;
    msg.code = Code::Get;
    msg.token = fresh_token();
    msg.options.set_path(path);
    msg.options.observe = 0;
    msg.options.binding = binding;
    return send_request(std::move(msg), {server, coap_default_port}, fresh_port());
}

void VirtualClient::deploy(const Address& server, const std::string& filename, const Bytes& image,
                           std::uint16_t block_size, const std::string& loader_path) {
    Upload up;
    up.server = {server, coap_default_port};
    up.filename = filename;
    up.loader_path = loader_path;
    up.image = image;
    up.block_size = block_size;
    up.port = fresh_port();
    uploads_.push_back(std::move(up));
    send_block(uploads_.size() - 1);
}

void VirtualClient::send_block(std::size_t index) {
    const auto& up = uploads_[index];
    const std::size_t offset = static_cast<std::size_t>(up.next) * up.block_size;
    const std::size_t end = std::min(up.image.size(), offset + up.block_size);
    Message msg;
    msg.type = MessageType::Confirmable;
    msg.code = Code::Post;
    msg.mid = next_mid();
    msg.token = fresh_token();
    msg.options.set_path(up.loader_path);
    msg.options.uri_query = {"file=" + up.filename};
    msg.options.block1 = coap::BlockOption{up.next, end < up.image.size(), up.block_size};
    msg.payload.assign(up.image.begin() + static_cast<std::ptrdiff_t>(offset),
                       up.image.begin() + static_cast<std::ptrdiff_t>(end));

    const auto id = next_request_++;
    const bool last = end >= up.image.size();
    ReliableSender::Callbacks cb;
    cb.on_reply = [this, id, index, last](const Message& reply) {
        responses_.push_back({id, env_.scheduler.now(), reply.code, reply.payload});
        auto& u = uploads_[index];
        if (reply.code == Code::Continue && !last) {
            ++u.next;
            send_block(index);
        } else if (last && coap::code_class(reply.code) == 2) {
            deploys_done_.push_back(u.filename);
            log(fmt::format("deploy {} complete", u.filename));
        } else {
            log(fmt::format("deploy {} failed with {}", u.filename, coap::to_string(reply.code)));
        }
    };
    sender_.send(Datagram{{addr_, up.port}, up.server, coap::encode(msg)}, msg.mid, std::move(cb));
}

auto VirtualClient::observation(const coap::Token& token) const -> const Observation* {
    for (const auto& o : observations_) {
        if (o.token == token) return &o;
    }
    return nullptr;
}

void VirtualClient::on_notification(const Datagram& dg, const Message& msg) {
    auto it = std::find_if(observations_.begin(), observations_.end(),
                           [&](const Observation& o) { return o.token == msg.token; });
    if (it == observations_.end()) return;
    const auto now = env_.scheduler.now();
    ReceivedNotification n;
    n.at = now;
    n.server = dg.src;
    n.token = msg.token;
    n.observe = *msg.options.observe;
    n.mid = msg.mid;
    n.type = msg.type;
    n.payload = msg.payload;
    n.fresh = !it->last_observe || observe_is_fresh(*it->last_observe, it->last_at, n.observe, now);
    if (n.fresh) {
        it->last_observe = n.observe;
        it->last_at = now;
    }
    notifications_.push_back(std::move(n));
}

void VirtualClient::receive(const Datagram& dg) {
    if (silent_) {
        log(fmt::format("DROP (silent) from {}", dg.src.to_string()));
        return;
    }
    const auto decoded = coap::decode(dg.payload);
    if (!decoded) return;
    const Message& msg = *decoded;

    if (msg.type == MessageType::Acknowledgement || msg.type == MessageType::Reset) {
        sender_.on_reply(dg.src, msg);
        return;
    }

    if (msg.is_request()) {
        if (msg.type == MessageType::Confirmable) {
            auto resp = coap::make_piggybacked(msg, msg.code == Code::Put ? Code::Changed
                                                                          : Code::MethodNotAllowed);
            env_.send(Datagram{dg.dst, dg.src, coap::encode(resp)});
        }
        return;
    }
    if (msg.code == Code::Empty) {
        if (msg.type == MessageType::Confirmable) {
            env_.send(Datagram{dg.dst, dg.src, coap::encode(coap::make_reset(msg.mid))});
        }
        return;
    }

    auto it = std::find_if(observations_.begin(), observations_.end(),
                           [&](const Observation& o) { return o.token == msg.token; });
    if (it == observations_.end() || !msg.options.observe) {
        // Unknown exchange: reject it.
        env_.send(Datagram{dg.dst, dg.src, coap::encode(coap::make_reset(msg.mid))});
        return;
    }
    if (it->reset_next) {
        log(fmt::format("RST notification mid={} token={}", msg.mid, to_hex(msg.token)));
        observations_.erase(it);
        env_.send(Datagram{dg.dst, dg.src, coap::encode(coap::make_reset(msg.mid))});
        return;
    }
    on_notification(dg, msg);
    if (msg.type == MessageType::Confirmable) {
        env_.send(Datagram{dg.dst, dg.src, coap::encode(coap::make_empty_ack(msg.mid))});
    }
}

} // namespace coapsd::lln
