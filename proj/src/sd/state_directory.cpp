#include "coapsd/sd/state_directory.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <ostream>

namespace coapsd::sd {

using coap::InteractionKind;
using coap::Message;
using coap::MessageType;

auto to_string(EntryType t) -> std::string_view {
    switch (t) {
    case EntryType::Put: return "PUT";
    case EntryType::Observe: return "OBSERVE";
    case EntryType::Bind: return "BIND";
    case EntryType::Deploy: return "DEPLOY";
    }
    return "?";
}

auto to_string(EffectKind k) -> std::string_view {
    switch (k) {
    case EffectKind::Created: return "Created";
    case EffectKind::Updated: return "Updated";
    case EffectKind::Removed: return "Removed";
    case EffectKind::NoEffect: return "NoEffect";
    }
    return "?";
}

auto to_string(Registration r) -> std::string_view {
    switch (r) {
    case Registration::New: return "new";
    case Registration::KnownEmpty: return "known_empty";
    case Registration::KnownWithState: return "known_with_state";
    }
    return "?";
}

StateDirectory::StateDirectory(DirectoryConfig config, LogSink log)
    : config_{std::move(config)}, log_{std::move(log)} {}

void StateDirectory::log(std::string_view line) const {
    if (log_) log_(line);
}

void StateDirectory::log_entry(std::string_view prefix, const SdEntry& e) const {
    if (!log_) return;
    log(fmt::format("{}Type = {} Client {}:{} Server {}:{}/{} obs <{}> mid <{}> ret <{}>", prefix,
                    static_cast<int>(e.type), e.client.addr.to_string(), e.client.port,
                    e.server.addr.to_string(), e.server.port, e.uri_path, e.observe_counter, e.mid,
                    e.retransmit_counter));
}

auto StateDirectory::intercept_from_internet(const Message& msg, const Endpoint& src,
                                             const Endpoint& dst, SimTime now) -> SdEffect {
    std::lock_guard lock{mutex_};
    switch (coap::classify(msg)) {
    case InteractionKind::PutRequest: return on_put(msg, src, dst, now);
    case InteractionKind::ObserveRegister: return on_observe_register(msg, src, dst, now);
    case InteractionKind::ObserveDeregister: return on_observe_deregister(msg, src, dst);
    case InteractionKind::BindingRequest: return on_binding(msg, src, dst, now);
    case InteractionKind::DeployBlock: return on_deploy_block(msg, src, dst, now);
    case InteractionKind::AckSignal: return on_client_ack(msg, src, dst, now);
    case InteractionKind::ResetSignal: return on_client_reset(msg, src, dst);
    default: return SdEffect::none();
    }
}

auto StateDirectory::intercept_from_lln(const Message& msg, const Endpoint& src,
                                        const Endpoint& dst, SimTime now) -> SdEffect {
    std::lock_guard lock{mutex_};
    switch (coap::classify(msg)) {
    case InteractionKind::Notification: return on_notification(msg, src, dst, now);
    case InteractionKind::ResetSignal: {
        // A node refusing a client message: mirror the relationship teardown.
        for (const auto& [id, e] : entries_) {
            if (e.type == EntryType::Observe && e.server == src && e.client == dst &&
                e.mid == msg.mid) {
                return remove(id);
            }
        }
        return SdEffect::none();
    }
    default: return SdEffect::none();
    }
}

auto StateDirectory::create(SdEntry entry, SimTime now) -> SdEffect {
    entry.id = next_id_++;
    entry.created_at = now;
    entry.updated_at = now;
    const auto id = entry.id;
    log_entry("++++Entry SD: ", entry);
    entries_.emplace(id, std::move(entry));
    return {EffectKind::Created, id};
}

auto StateDirectory::remove(EntryId id) -> SdEffect {
    auto it = entries_.find(id);
    if (it == entries_.end()) return SdEffect::none();
    log_entry("----Removed SD: ", it->second);
    entries_.erase(it);
    return {EffectKind::Removed, id};
}

auto StateDirectory::on_put(const Message& msg, const Endpoint& src, const Endpoint& dst,
                            SimTime now) -> SdEffect {
    const auto path = msg.options.path();
    for (auto& [id, e] : entries_) {
        if (e.type == EntryType::Put && e.server == dst && e.uri_path == path) {
            e.client = src;
            e.token = msg.token;
            e.mid = msg.mid;
            e.value = msg.payload;
            e.content_format = msg.options.content_format;
            e.updated_at = now;
            log_entry("++++Updated SD: ", e);
            return {EffectKind::Updated, id};
        }
    }
    SdEntry e;
    e.type = EntryType::Put;
    e.client = src;
    e.server = dst;
    e.uri_path = path;
    e.token = msg.token;
    e.mid = msg.mid;
    e.value = msg.payload;
    e.content_format = msg.options.content_format;
    return create(std::move(e), now);
}

auto StateDirectory::on_observe_register(const Message& msg, const Endpoint& src,
                                         const Endpoint& dst, SimTime now) -> SdEffect {
    const auto path = msg.options.path();
    for (auto& [id, e] : entries_) {
        if (e.type == EntryType::Observe && e.client == src && e.server == dst &&
            e.uri_path == path) {
            e.token = msg.token;
            e.mid = msg.mid;
            e.updated_at = now;
            log_entry("++++Updated SD: ", e);
            return {EffectKind::Updated, id};
        }
    }
    log(fmt::format("SD: New Obs relationship from client {} to server <{}/{}>.",
                    src.addr.to_string(), dst.addr.to_string(), path));
    SdEntry e;
    e.type = EntryType::Observe;
    e.client = src;
    e.server = dst;
    e.uri_path = path;
    e.token = msg.token;
    e.mid = msg.mid;
    return create(std::move(e), now);
}

auto StateDirectory::on_observe_deregister(const Message& msg, const Endpoint& src,
                                           const Endpoint& dst) -> SdEffect {
    const auto path = msg.options.path();
    for (const auto& [id, e] : entries_) {
        if (e.type == EntryType::Observe && e.client == src && e.server == dst &&
            e.uri_path == path) {
            return remove(id);
        }
    }
    return SdEffect::none();
}

auto StateDirectory::on_binding(const Message& msg, const Endpoint& src, const Endpoint& dst,
                                SimTime now) -> SdEffect {
    const auto path = msg.options.path();
    const auto& b = *msg.options.binding;
    for (auto& [id, e] : entries_) {
        if (e.type == EntryType::Bind && e.server == dst && e.uri_path == path &&
            e.binding->dest_addr == b.dest_addr && e.binding->dest_resource == b.dest_resource) {
            e.client = src;
            e.token = msg.token;
            e.mid = msg.mid;
            e.binding = b;
            e.updated_at = now;
            return {EffectKind::Updated, id};
        }
    }
    SdEntry e;
    e.type = EntryType::Bind;
    e.client = src;
    e.server = dst;
    e.uri_path = path;
    e.token = msg.token;
    e.mid = msg.mid;
    e.binding = b;
    return create(std::move(e), now);
}

auto StateDirectory::on_deploy_block(const Message& msg, const Endpoint& src, const Endpoint& dst,
                                     SimTime now) -> SdEffect {
    auto filename = msg.options.query_value("file");
    if (!filename || filename->empty()) return SdEffect::none();
    const auto& block = *msg.options.block1;
    const auto path = msg.options.path();
    const auto key = std::make_tuple(src, dst, path, *filename);

    auto it = pending_.find(key);
    if (block.num == 0) {
        PendingDeploy p;
        p.filename = *filename;
        p.loader_path = path;
        p.block_size = block.size;
        it = pending_.insert_or_assign(key, std::move(p)).first;
    } else if (it == pending_.end()) {
        return SdEffect::none();
    } else if (block.num + 1 == it->second.next_num) {
        return SdEffect::none(); // retransmitted block
    } else if (block.num != it->second.next_num) {
        pending_.erase(it);
        return SdEffect::none();
    }

    auto& pending = it->second;
    pending.blocks.push_back(msg.payload);
    pending.next_num = block.num + 1;
    if (block.more) return SdEffect::none();

    DeployInfo info;
    info.filename = pending.filename;
    info.loader_path = pending.loader_path;
    info.block_size = pending.block_size;
    if (config_.deploy_mode == DeployMode::BlockCapture) {
        info.blocks = std::move(pending.blocks);
    }
    pending_.erase(it);

    for (auto& [id, e] : entries_) {
        if (e.type == EntryType::Deploy && e.server == dst && e.deploy->filename == info.filename) {
            e.client = src;
            e.token = msg.token;
            e.mid = msg.mid;
            e.uri_path = path;
            e.deploy = std::move(info);
            e.updated_at = now;
            return {EffectKind::Updated, id};
        }
    }
    SdEntry e;
    e.type = EntryType::Deploy;
    e.client = src;
    e.server = dst;
    e.uri_path = path;
    e.token = msg.token;
    e.mid = msg.mid;
    e.deploy = std::move(info);
    return create(std::move(e), now);
}

auto StateDirectory::on_client_ack(const Message& msg, const Endpoint& src, const Endpoint& dst,
                                   SimTime now) -> SdEffect {
    for (auto& [id, e] : entries_) {
        if (e.type == EntryType::Observe && e.client == src && e.server == dst &&
            e.mid == msg.mid) {
            if (e.retransmit_counter == 0) return SdEffect::none();
            e.retransmit_counter = 0;
            e.updated_at = now;
            return {EffectKind::Updated, id};
        }
    }
    return SdEffect::none();
}

auto StateDirectory::on_client_reset(const Message& msg, const Endpoint& src, const Endpoint& dst)
    -> SdEffect {
    for (const auto& [id, e] : entries_) {
        if (e.type == EntryType::Observe && e.client == src && e.server == dst &&
            e.mid == msg.mid) {
            return remove(id);
        }
    }
    return SdEffect::none();
}

auto StateDirectory::on_notification(const Message& msg, const Endpoint& src, const Endpoint& dst,
                                     SimTime now) -> SdEffect {
    const auto observe = *msg.options.observe;
    for (auto& [id, e] : entries_) {
        if (e.type != EntryType::Observe || e.server != src || e.client != dst ||
            e.token != msg.token) {
            continue;
        }
        if (msg.type == MessageType::Acknowledgement) {
            // Piggybacked registration response: carries the request's MID, so only
            // the counter is meaningful.
            if (e.observe_counter == observe) return SdEffect::none();
            e.observe_counter = observe;
            e.updated_at = now;
            return {EffectKind::Updated, id};
        }
        const bool retransmission = msg.type == MessageType::Confirmable && msg.mid == e.mid &&
                                    observe == e.observe_counter;
        if (retransmission) {
            ++e.retransmit_counter;
            e.updated_at = now;
            log_entry("SD: Retransmission detected ", e);
            if (e.retransmit_counter >= config_.max_retransmit) {
                return remove(id);
            }
            return {EffectKind::Updated, id};
        }
        e.observe_counter = observe;
        e.mid = msg.mid;
        e.retransmit_counter = 0;
        e.updated_at = now;
        return {EffectKind::Updated, id};
    }
    return SdEffect::none();
}

auto StateDirectory::entries_for_server(const Address& server) const -> std::vector<SdEntry> {
    std::lock_guard lock{mutex_};
    std::vector<SdEntry> out;
    for (const auto& [id, e] : entries_) {
        if (e.server.addr == server) out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const SdEntry& a, const SdEntry& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
    });
    return out;
}

auto StateDirectory::register_node(const Address& node) -> Registration {
    std::lock_guard lock{mutex_};
    log("Search Server");
    std::size_t found = 0;
    for (const auto& [id, e] : entries_) {
        if (e.server.addr != node) continue;
        ++found;
        if (log_) {
            log(fmt::format("Found: EntryType = <{}>", static_cast<int>(e.type)));
            log(fmt::format("Client<{}>", e.client.to_string()));
            log(fmt::format("Server<{}>", e.server.to_string()));
            log(fmt::format("Uri path <{}>", e.uri_path));
            log(fmt::format("Token[{}]= <{}>", e.token.size(), to_hex(e.token)));
            log(fmt::format("Observe = <{}>", e.observe_counter));
        }
    }
    const bool known = !nodes_.insert(node).second;
    if (found == 0) log("State Information not found");
    log("End Search Server");
    if (found > 0) return Registration::KnownWithState;
    return known ? Registration::KnownEmpty : Registration::New;
}

auto StateDirectory::find(EntryId id) const -> std::optional<SdEntry> {
    std::lock_guard lock{mutex_};
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

auto StateDirectory::snapshot() const -> DirectorySnapshot {
    std::lock_guard lock{mutex_};
    DirectorySnapshot s;
    s.entries.reserve(entries_.size());
    for (const auto& [id, e] : entries_) s.entries.push_back(e);
    s.nodes = nodes_;
    return s;
}

auto StateDirectory::size() const -> std::size_t {
    std::lock_guard lock{mutex_};
    return entries_.size();
}

void StateDirectory::write_snapshot(std::ostream& out) const {
    for (const auto& e : snapshot().entries) {
        out << write_snapshot_line(e) << '\n';
    }
}

auto write_snapshot_line(const SdEntry& e) -> std::string {
    std::string binding = "-";
    if (e.binding) {
        binding = fmt::format("{}|{}|{}|{}", e.binding->dest_addr.to_string(),
                              e.binding->dest_resource, e.binding->pmin, e.binding->pmax);
    }
    std::string deploy = "-";
    if (e.deploy) {
        deploy = fmt::format("{}|{}|{}|{}", e.deploy->filename, e.deploy->loader_path,
                             e.deploy->block_size, e.deploy->blocks ? e.deploy->blocks->size() : 0);
    }
    return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                       static_cast<int>(e.type), e.client.to_string(), e.server.to_string(),
                       e.uri_path.empty() ? "-" : e.uri_path,
                       e.token.empty() ? "-" : to_hex(e.token), e.mid, e.observe_counter,
                       e.retransmit_counter, e.value.empty() ? "-" : to_hex(e.value),
                       e.content_format ? std::to_string(*e.content_format) : "-", binding,
                       deploy, e.created_at.count(), e.updated_at.count());
}

} // namespace coapsd::sd
