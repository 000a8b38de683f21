#include "coapsd/lln/network.hpp"

#include "coapsd/coap/codec.hpp"

#include <fmt/format.h>

namespace coapsd::lln {

namespace {

enum Leg : int { ClientToGateway, GatewayToClient, NodeToGateway, GatewayToNode, NodeToNode };

auto describe(const Datagram& dg) -> std::string {
    const auto decoded = coap::decode(dg.payload);
    const auto body = decoded ? decoded->summary()
                              : fmt::format("<malformed {} bytes>", dg.payload.size());
    return fmt::format("{} -> {} {}", dg.src.to_string(), dg.dst.to_string(), body);
}

} // namespace

Network::Network(NetworkConfig config) : config_{std::move(config)}, rng_{config_.seed} {
    config_.external.validate();
}

void Network::trace(std::string_view line) {
    if (trace_) trace_(fmt::format("{:.3f} {}", to_ms(loop_.now()), line));
}

auto Network::add_node(NodeConfig config) -> VirtualNode& {
    const auto addr = config.addr;
    if (!config_.lln_prefix.contains(addr)) {
        throw std::invalid_argument("node address " + addr.to_string() + " outside LLN prefix");
    }
    if (nodes_.contains(addr)) throw std::invalid_argument("duplicate node " + addr.to_string());
    config.gateway = config_.gateway;
    NodeEnv env{loop_, rng_, [this, addr](const Datagram& dg) { from_node(addr, dg); },
                [this](std::string_view line) { trace(line); }};
    auto [it, _] = nodes_.emplace(addr, std::make_unique<VirtualNode>(std::move(config), env));
    return *it->second;
}

auto Network::add_client(const Address& addr, coap::TransmissionParams params) -> VirtualClient& {
    if (config_.lln_prefix.contains(addr)) {
        throw std::invalid_argument("client address " + addr.to_string() + " inside LLN prefix");
    }
    if (clients_.contains(addr)) throw std::invalid_argument("duplicate client " + addr.to_string());
    ClientEnv env{loop_, rng_, [this](const Datagram& dg) { from_client(dg); },
                  [this](std::string_view line) { trace(line); }};
    auto [it, _] = clients_.emplace(addr, std::make_unique<VirtualClient>(addr, env, params));
    return *it->second;
}

auto Network::node(const Address& addr) -> VirtualNode* {
    auto it = nodes_.find(addr);
    return it == nodes_.end() ? nullptr : it->second.get();
}

auto Network::client(const Address& addr) -> VirtualClient* {
    auto it = clients_.find(addr);
    return it == clients_.end() ? nullptr : it->second.get();
}

void Network::schedule(const Datagram& dg, const LinkModel& link, const PathKey& path,
                       std::function<void(const Datagram&)> deliver) {
    trace("SEND " + describe(dg));
    const auto delay = link.sample(rng_);
    if (!delay || (drop_filter_ && drop_filter_(dg))) {
        ++dropped_;
        trace(std::string{delay ? "DROP (scripted) " : "DROP (loss) "} + describe(dg));
        return;
    }
    auto& last = last_arrival_[path];
    const auto at = std::max(loop_.now() + *delay, last);
    last = at;
    loop_.schedule_at(at, [this, dg, deliver = std::move(deliver)] {
        ++delivered_;
        trace("RECV " + describe(dg));
        deliver(dg);
    });
}

void Network::from_node(const Address& node, const Datagram& dg) {
    const auto& link = nodes_.at(node)->config().link;
    if (config_.lln_prefix.contains(dg.dst.addr)) {
        schedule(dg, link, {node, dg.dst.addr, NodeToNode}, [this](const Datagram& d) {
            if (auto* n = this->node(d.dst.addr)) {
                n->receive(d);
            } else {
                trace("DROP (no such node) " + describe(d));
            }
        });
        return;
    }
    schedule(dg, link, {node, config_.gateway.addr, NodeToGateway}, [this](const Datagram& d) {
        if (gateway_) gateway_->forward(d, Side::Lln);
    });
}

void Network::from_client(const Datagram& dg) {
    external_.push_back({loop_.now(), true, dg});
    const PathKey path{dg.src.addr, config_.gateway.addr, ClientToGateway};
    schedule(dg, config_.external, path, [this](const Datagram& d) {
        if (gateway_) gateway_->forward(d, Side::External);
    });
}

void Network::send(Datagram dg, Side egress) {
    if (egress == Side::External) {
        external_.push_back({loop_.now(), false, dg});
        const PathKey path{config_.gateway.addr, dg.dst.addr, GatewayToClient};
        schedule(dg, config_.external, path, [this](const Datagram& d) {
            if (auto* c = client(d.dst.addr)) {
                c->receive(d);
            } else {
                trace("DROP (no such client) " + describe(d));
            }
        });
        return;
    }
    auto* n = node(dg.dst.addr);
    if (!n) {
        ++dropped_;
        trace("DROP (no such node) " + describe(dg));
        return;
    }
    const PathKey path{config_.gateway.addr, dg.dst.addr, GatewayToNode};
    schedule(dg, n->config().link, path, [this](const Datagram& d) {
        if (auto* target = node(d.dst.addr)) target->receive(d);
    });
}

} // namespace coapsd::lln
