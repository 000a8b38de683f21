#include "coapsd/lln/virtual_node.hpp"

#include "coapsd/coap/codec.hpp"
#include "coapsd/coap/interaction.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <stdexcept>

namespace coapsd::lln {

using coap::Code;
using coap::Message;
using coap::MessageType;

namespace {
constexpr std::uint16_t text_plain = 0;
}

auto to_string(NodePhase p) -> std::string_view {
    switch (p) {
    case NodePhase::Down: return "down";
    case NodePhase::Booting: return "booting";
    case NodePhase::Up: return "up";
    case NodePhase::Stalled: return "stalled";
    }
    return "?";
}

auto to_string(RemovalReason r) -> std::string_view {
    switch (r) {
    case RemovalReason::Deregistered: return "deregistered";
    case RemovalReason::Reset: return "reset";
    case RemovalReason::RetransmitLimit: return "retransmit-limit";
    case RemovalReason::Crash: return "crash";
    }
    return "?";
}

auto DynamicState::describe() const -> std::string {
    std::string s;
    for (const auto& [path, value] : parameters) {
        s += fmt::format("param {}={}\n", path, to_text(value));
    }
    for (const auto& o : observers) {
        s += fmt::format("observer {} /{} tok={} obs={}\n", o.client.to_string(), o.path,
                         to_hex(o.token), o.counter);
    }
    for (const auto& b : bindings) {
        s += fmt::format("binding /{} -> {}/{} pmin={} pmax={}\n", b.source_resource,
                         b.dest_addr.to_string(), b.dest_resource, b.pmin, b.pmax);
    }
    for (const auto& m : loaded_modules) s += fmt::format("module {}\n", m);
    return s;
}

VirtualNode::VirtualNode(NodeConfig config, NodeEnv env)
    : config_{std::move(config)},
      env_{std::move(env)},
      sender_{env_.scheduler, env_.rng, config_.transmission,
              [this](const Datagram& dg) { env_.send(dg); }},
      flash_{config_.flash} {
    config_.link.validate();
    for (auto& r : config_.resources) r.path = coap::normalize_path(r.path);
    config_.loader_path = coap::normalize_path(config_.loader_path);
    reset_volatile();
}

void VirtualNode::log(std::string_view line) const {
    if (env_.trace) env_.trace(fmt::format("node {} {}", config_.addr.to_string(), line));
}

void VirtualNode::reset_volatile() {
    for (auto& b : bindings_) {
        if (b.pmax_timer) env_.scheduler.cancel(b.pmax_timer);
    }
    resources_.clear();
    for (const auto& r : config_.resources) resources_[r.path] = r.default_value;
    observers_.clear();
    bindings_.clear();
    loaded_modules_.clear();
    upload_.clear();
    exchanges_.clear();
    deferred_changes_.clear();
}

auto VirtualNode::next_mid() -> coap::MessageId {
    return mid_counter_++;
}

void VirtualNode::transmit(const Endpoint& dst, const Message& msg) {
    env_.send(Datagram{endpoint(), dst, coap::encode(msg)});
}

void VirtualNode::boot() {
    if (phase_ == NodePhase::Booting) {
        throw std::logic_error("node is already booting");
    }
    ++incarnation_;
    ++epoch_;
    sender_.clear();
    reset_volatile();
    mid_counter_ = static_cast<coap::MessageId>(env_.rng() & 0xFFFF);
    phase_ = NodePhase::Booting;
    log(fmt::format("BOOT epoch={}", epoch_));
    send_registration();
}

void VirtualNode::send_registration() {
    const auto mid = next_mid();
    auto msg = coap::registration_request(mid);
    BootRecord rec;
    rec.epoch = epoch_;
    rec.registration_sent = env_.scheduler.now();
    boots_.push_back(rec);

    const auto incarnation = incarnation_;
    ReliableSender::Callbacks cb;
    cb.on_reply = [this, incarnation](const Message&) {
        if (incarnation != incarnation_ || phase_ != NodePhase::Booting) return;
        phase_ = NodePhase::Up;
        boots_.back().acked_at = env_.scheduler.now();
        log("registered");
    };
    cb.on_retransmit = [this, incarnation](unsigned n) {
        if (incarnation == incarnation_) boots_.back().retransmissions = n;
    };
    cb.on_give_up = [this, incarnation] {
        if (incarnation != incarnation_) return;
        phase_ = NodePhase::Stalled;
        boots_.back().stalled = true;
        log("BootStalled: registration never acknowledged");
    };
    sender_.send(Datagram{endpoint(), config_.gateway, coap::encode(msg)}, mid, std::move(cb));
}

void VirtualNode::crash(SimDuration downtime) {
    ++incarnation_;
    phase_ = NodePhase::Down;
    sender_.clear();
    reset_volatile();
    log(fmt::format("CRASH downtime={}ms", to_ms(downtime)));
    const auto incarnation = incarnation_;
    env_.scheduler.schedule_after(downtime, [this, incarnation] {
        if (incarnation == incarnation_) boot();
    });
}

void VirtualNode::receive(const Datagram& dg) {
    if (phase_ == NodePhase::Down || phase_ == NodePhase::Stalled) {
        log(fmt::format("DROP ({}) from {}", to_string(phase_), dg.src.to_string()));
        return;
    }
    const auto decoded = coap::decode(dg.payload);
    if (!decoded) {
        log(fmt::format("DROP malformed from {}: {}", dg.src.to_string(),
                        coap::to_string(decoded.error)));
        return;
    }
    const Message& msg = *decoded;

    if (phase_ == NodePhase::Booting) {
        if (msg.type == MessageType::Acknowledgement || msg.type == MessageType::Reset) {
            sender_.on_reply(dg.src, msg);
        } else {
            log(fmt::format("DROP (booting) {}", msg.summary()));
        }
        return;
    }

    if (msg.type == MessageType::Acknowledgement || msg.type == MessageType::Reset) {
        if (msg.type == MessageType::Reset) {
            for (const auto& o : observers_) {
                if (o.client == dg.src && o.last_mid == msg.mid) {
                    remove_observer(o.client, o.path, RemovalReason::Reset);
                    break;
                }
            }
        }
        sender_.on_reply(dg.src, msg);
        return;
    }

    if (msg.code == Code::Empty) {
        if (msg.type == MessageType::Confirmable) transmit(dg.src, coap::make_reset(msg.mid));
        return;
    }

    if (!msg.is_request()) {
        // Separate response to one of our own requests.
        if (msg.type == MessageType::Confirmable) transmit(dg.src, coap::make_empty_ack(msg.mid));
        return;
    }

    const bool confirmable = msg.type == MessageType::Confirmable;
    if (confirmable) {
        if (auto it = exchanges_.find({dg.src, msg.mid}); it != exchanges_.end()) {
            transmit(dg.src, it->second);
            return;
        }
    }

    auto response = handle_request(msg, dg.src);
    if (response) {
        if (confirmable) {
            response->type = MessageType::Acknowledgement;
            response->mid = msg.mid;
            exchanges_[{dg.src, msg.mid}] = *response;
        } else {
            response->type = MessageType::NonConfirmable;
            response->mid = next_mid();
        }
        transmit(dg.src, *response);
    }

    auto changes = std::move(deferred_changes_);
    deferred_changes_.clear();
    for (const auto& [path, observe] : changes) resource_changed(path, observe);
}

auto VirtualNode::handle_request(const Message& req, const Endpoint& src)
    -> std::optional<Message> {
    ++requests_handled_;
    Message resp = coap::make_piggybacked(req, Code::Content);
    const auto path = req.options.path();

    if (path == config_.loader_path) {
        handle_loader(req, resp);
        return resp;
    }
    auto it = resources_.find(path);
    if (it == resources_.end()) {
        resp.code = Code::NotFound;
        return resp;
    }

    switch (req.code) {
    case Code::Get:
        handle_get(req, src, path, resp);
        break;
    case Code::Put: {
        const auto spec = std::find_if(config_.resources.begin(), config_.resources.end(),
                                       [&](const ResourceSpec& r) { return r.path == path; });
        if (!spec->writable) {
            resp.code = Code::MethodNotAllowed;
            break;
        }
        const bool changed = it->second != req.payload;
        it->second = req.payload;
        resp.code = Code::Changed;
        if (changed) deferred_changes_.emplace_back(path, std::nullopt);
        break;
    }
    default:
        resp.code = Code::MethodNotAllowed;
        break;
    }
    return resp;
}

void VirtualNode::handle_get(const Message& req, const Endpoint& src, const std::string& path,
                             Message& resp) {
    const auto& o = req.options;
    resp.code = Code::Content;
    resp.options.content_format = text_plain;
    resp.payload = resources_.at(path);

    if (o.observe && o.binding) {
        const auto& b = *o.binding;
        auto existing = std::find_if(bindings_.begin(), bindings_.end(), [&](const auto& r) {
            return r.source_resource == path && r.binding.dest_addr == b.dest_addr &&
                   r.binding.dest_resource == b.dest_resource;
        });
        if (existing != bindings_.end()) {
            existing->binding = b;
        } else {
            bindings_.push_back(BindingRecord{b, path, std::nullopt, false, 0});
        }
        log(fmt::format("binding /{} -> {}/{}", path, b.dest_addr.to_string(), b.dest_resource));
        return;
    }
    if (!o.observe) return;

    if (*o.observe == 1) {
        remove_observer(src, path, RemovalReason::Deregistered);
        return;
    }

    // A nonzero observe value in a registration seeds the counter; used to resume a
    // relationship after reboot.
    Observer* obs = find_observer(src, path);
    if (!obs) {
        Observer fresh;
        fresh.client = src;
        fresh.path = path;
        fresh.max_age = config_.max_age;
        fresh.counter = *o.observe;
        observers_.push_back(std::move(fresh));
        obs = &observers_.back();
    } else if (*o.observe > 0) {
        obs->counter = *o.observe;
    }
    obs->token = req.token;
    obs->notified_since_registration = false;
    obs->retransmit_count = 0;
    resp.options.observe = obs->counter;
    resp.options.max_age = obs->max_age;

    NotificationRecord rec;
    rec.epoch = epoch_;
    rec.at = env_.scheduler.now();
    rec.client = src;
    rec.path = path;
    rec.token = req.token;
    rec.observe = obs->counter;
    rec.mid = req.mid;
    rec.type = req.type == MessageType::Confirmable ? MessageType::Acknowledgement
                                                     : MessageType::NonConfirmable;
    rec.is_registration_response = true;
    notifications_.push_back(std::move(rec));
    log(fmt::format("observer {} /{} obs={}", src.to_string(), path, obs->counter));
}

void VirtualNode::handle_loader(const Message& req, Message& resp) {
    const auto file = req.options.query_value("file");
    if (req.code == Code::Get) {
        std::string list;
        for (const auto& m : loaded_modules_) list += (list.empty() ? "" : ",") + m;
        resp.code = Code::Content;
        resp.payload = to_bytes(list);
        return;
    }
    if (req.code != Code::Post && req.code != Code::Put) {
        resp.code = Code::MethodNotAllowed;
        return;
    }
    if (!file || file->empty()) {
        resp.code = Code::BadRequest;
        return;
    }
    const auto done_code = req.code == Code::Post ? Code::Created : Code::Changed;

    if (!req.options.block1) {
        if (!flash_.contains(*file)) {
            resp.code = Code::BadRequest;
            return;
        }
        loaded_modules_.insert(*file);
        log(fmt::format("loaded {} from flash", *file));
        resp.code = done_code;
        return;
    }

    const auto& block = *req.options.block1;
    auto& buffer = upload_[*file];
    if (block.num == 0) buffer.clear();
    if (static_cast<std::size_t>(block.num) * block.size != buffer.size()) {
        resp.code = Code::RequestEntityIncomplete;
        return;
    }
    buffer.insert(buffer.end(), req.payload.begin(), req.payload.end());
    resp.options.block1 = block;
    if (block.more) {
        resp.code = Code::Continue;
        return;
    }
    // Written to permanent storage first, then relocated and loaded.
    flash_[*file] = std::move(buffer);
    upload_.erase(*file);
    loaded_modules_.insert(*file);
    log(fmt::format("stored and loaded {} ({} bytes)", *file, flash_[*file].size()));
    resp.code = done_code;
}

auto VirtualNode::find_observer(const Endpoint& client, const std::string& path) -> Observer* {
    for (auto& o : observers_) {
        if (o.client == client && o.path == path) return &o;
    }
    return nullptr;
}

void VirtualNode::remove_observer(const Endpoint& client, const std::string& path,
                                  RemovalReason reason) {
    auto it = std::find_if(observers_.begin(), observers_.end(), [&](const Observer& o) {
        return o.client == client && o.path == path;
    });
    if (it == observers_.end()) return;
    ObserverRemoval rec;
    rec.at = env_.scheduler.now();
    rec.client = client;
    rec.path = path;
    rec.reason = reason;
    rec.mid = it->last_mid;
    rec.retransmissions = it->retransmit_count;
    removals_.push_back(rec);
    log(fmt::format("observer removed {} /{} ({})", client.to_string(), path, to_string(reason)));
    observers_.erase(it);
}

void VirtualNode::set_resource(const std::string& raw_path, Bytes value,
                               std::optional<std::uint32_t> observe) {
    const auto path = coap::normalize_path(raw_path);
    auto it = resources_.find(path);
    if (it == resources_.end()) {
        throw std::invalid_argument("unknown resource /" + path);
    }
    if (phase_ != NodePhase::Up) {
        log(fmt::format("reading on /{} ignored ({})", path, to_string(phase_)));
        return;
    }
    it->second = std::move(value);
    resource_changed(path, observe);
}

void VirtualNode::resource_changed(const std::string& path, std::optional<std::uint32_t> observe) {
    notify_observers(path, observe);
    for (auto& b : bindings_) {
        if (b.source_resource == path) binding_changed(b);
    }
}

void VirtualNode::notify_observers(const std::string& path, std::optional<std::uint32_t> observe) {
    for (auto& o : observers_) {
        if (o.path != path) continue;
        if (observe) {
            if (*observe == 1) {
                throw std::invalid_argument("scripted observe value 1 is not allowed");
            }
            if (*observe <= o.counter) {
                throw std::invalid_argument(fmt::format(
                    "scripted observe value {} does not exceed counter {}", *observe, o.counter));
            }
            o.counter = *observe;
        } else {
            // Skips 1, the deregistration value.
            o.counter = (o.counter + 1) & coap::max_observe_value;
            if (o.counter == 1) o.counter = 2;
        }
    }
    // Sending may remove observers (never synchronously today), so work on a key list.
    std::vector<std::pair<Endpoint, std::string>> keys;
    for (const auto& o : observers_) {
        if (o.path == path) keys.emplace_back(o.client, o.path);
    }
    for (const auto& [client, p] : keys) {
        if (auto* o = find_observer(client, p)) send_notification(*o, false);
    }
}

void VirtualNode::send_notification(Observer& obs, bool registration_response) {
    MessageType type = MessageType::NonConfirmable;
    switch (config_.policy) {
    case NotificationPolicy::FirstNonThenCon:
        type = obs.notified_since_registration ? MessageType::Confirmable
                                               : MessageType::NonConfirmable;
        break;
    case NotificationPolicy::AlwaysCon: type = MessageType::Confirmable; break;
    case NotificationPolicy::AlwaysNon: type = MessageType::NonConfirmable; break;
    }

    Message msg;
    msg.type = type;
    msg.code = Code::Content;
    msg.mid = next_mid();
    msg.token = obs.token;
    msg.options.observe = obs.counter;
    msg.options.max_age = obs.max_age;
    msg.options.content_format = text_plain;
    msg.payload = resources_.at(obs.path);

    sender_.cancel(obs.client, obs.last_mid); // a newer notification supersedes
    obs.last_mid = msg.mid;
    obs.retransmit_count = 0;
    obs.notified_since_registration = true;

    NotificationRecord rec;
    rec.epoch = epoch_;
    rec.at = env_.scheduler.now();
    rec.client = obs.client;
    rec.path = obs.path;
    rec.token = obs.token;
    rec.observe = obs.counter;
    rec.mid = msg.mid;
    rec.type = type;
    rec.is_registration_response = registration_response;
    notifications_.push_back(std::move(rec));

    Datagram dg{endpoint(), obs.client, coap::encode(msg)};
    if (type != MessageType::Confirmable) {
        env_.send(dg);
        return;
    }

    const auto client = obs.client;
    const auto path = obs.path;
    const auto mid = msg.mid;
    const auto incarnation = incarnation_;
    ReliableSender::Callbacks cb;
    cb.on_reply = [this, client, path, mid, incarnation](const Message& reply) {
        if (incarnation != incarnation_) return;
        auto* o = find_observer(client, path);
        if (!o || o->last_mid != mid) return;
        if (reply.type == MessageType::Reset) {
            remove_observer(client, path, RemovalReason::Reset);
        } else {
            o->retransmit_count = 0;
        }
    };
    cb.on_retransmit = [this, client, path, mid, incarnation](unsigned n) {
        if (incarnation != incarnation_) return;
        auto* o = find_observer(client, path);
        if (!o || o->last_mid != mid) return;
        o->retransmit_count = n;
        // The relationship ends with the last permitted retransmission; the gateway
        // sees this same frame and drops its mirror entry.
        if (n >= config_.transmission.max_retransmit) {
            remove_observer(client, path, RemovalReason::RetransmitLimit);
            sender_.cancel(client, mid);
        }
    };
    sender_.send(std::move(dg), mid, std::move(cb));
}

void VirtualNode::binding_changed(BindingRecord& b) {
    const auto index = static_cast<std::size_t>(&b - bindings_.data());
    const auto now = env_.scheduler.now();
    const SimDuration pmin = std::chrono::seconds{b.binding.pmin};
    if (!b.last_sent || now - *b.last_sent >= pmin) {
        send_binding_put(index);
        return;
    }
    if (b.deferred) return;
    b.deferred = true;
    const auto incarnation = incarnation_;
    env_.scheduler.schedule_after(*b.last_sent + pmin - now, [this, index, incarnation] {
        if (incarnation != incarnation_ || index >= bindings_.size()) return;
        bindings_[index].deferred = false;
        send_binding_put(index);
    });
}

void VirtualNode::send_binding_put(std::size_t index) {
    auto& b = bindings_[index];
    Message msg;
    msg.type = MessageType::Confirmable;
    msg.code = Code::Put;
    msg.mid = next_mid();
    msg.token = {static_cast<std::uint8_t>(env_.rng() & 0xFF),
                 static_cast<std::uint8_t>(env_.rng() & 0xFF)};
    msg.options.set_path(b.binding.dest_resource);
    msg.options.content_format = text_plain;
    msg.payload = resources_.at(b.source_resource);
    b.last_sent = env_.scheduler.now();
    log(fmt::format("binding PUT /{} -> {}/{}", b.source_resource, b.binding.dest_addr.to_string(),
                    b.binding.dest_resource));
    sender_.send(Datagram{endpoint(), {b.binding.dest_addr, coap_default_port}, coap::encode(msg)},
                 msg.mid, {});

    if (b.pmax_timer) env_.scheduler.cancel(b.pmax_timer);
    b.pmax_timer = 0;
    if (b.binding.pmax > 0) {
        const auto incarnation = incarnation_;
        b.pmax_timer = env_.scheduler.schedule_after(
            std::chrono::seconds{b.binding.pmax}, [this, index, incarnation] {
                if (incarnation != incarnation_ || index >= bindings_.size()) return;
                bindings_[index].pmax_timer = 0;
                send_binding_put(index);
            });
    }
}

auto VirtualNode::resource(const std::string& path) const -> std::optional<Bytes> {
    auto it = resources_.find(coap::normalize_path(path));
    if (it == resources_.end()) return std::nullopt;
    return it->second;
}

auto VirtualNode::dynamic_state() const -> DynamicState {
    DynamicState s;
    for (const auto& r : config_.resources) {
        if (r.writable) s.parameters[r.path] = resources_.at(r.path);
    }
    for (const auto& o : observers_) {
        s.observers.push_back({o.client, o.path, o.token, o.counter});
    }
    std::sort(s.observers.begin(), s.observers.end());
    for (const auto& b : bindings_) {
        s.bindings.push_back({b.source_resource, b.binding.dest_addr, b.binding.dest_resource,
                              b.binding.pmin, b.binding.pmax});
    }
    std::sort(s.bindings.begin(), s.bindings.end());
    s.loaded_modules = loaded_modules_;
    return s;
}

} // namespace coapsd::lln
