#pragma once

#include "coapsd/core/address.hpp"
#include "coapsd/core/transport.hpp"
#include "coapsd/lln/event_loop.hpp"
#include "coapsd/lln/link_model.hpp"
#include "coapsd/lln/virtual_client.hpp"
#include "coapsd/lln/virtual_node.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace coapsd::lln {

struct NetworkConfig {
    Prefix lln_prefix{*Prefix::parse("aaaa::/64")};
    Endpoint gateway{Address::from_string("cccc::1"), coap_default_port};
    LinkModel external{LinkModel::fixed(1, std::chrono::milliseconds{1})};
    std::uint64_t seed{1};
};

// A frame seen on the external side of the gateway.
struct ExternalFrame {
    SimTime at{};
    bool toward_gateway{false}; // client -> gateway when true
    Datagram dg;

    auto operator==(const ExternalFrame&) const -> bool = default;
};

// Topology: clients on the external side, nodes behind the gateway, one link model per
// node for its path to the gateway. Delivery is FIFO per directed link.
class Network final : public Transport {
public:
    using TraceSink = std::function<void(std::string_view)>;

    explicit Network(NetworkConfig config);

    auto loop() -> EventLoop& { return loop_; }
    auto rng() -> Rng& { return rng_; }
    auto config() const -> const NetworkConfig& { return config_; }

    auto add_node(NodeConfig config) -> VirtualNode&;
    auto add_client(const Address& addr, coap::TransmissionParams params = {}) -> VirtualClient&;
    void attach_gateway(FrameSink* gateway) { gateway_ = gateway; }
    void set_trace(TraceSink sink) { trace_ = std::move(sink); }
    // Scripted loss: frames for which the filter returns true are dropped after the
    // link sample is drawn, so the RNG stream is unchanged.
    void set_drop_filter(std::function<bool(const Datagram&)> filter) {
        drop_filter_ = std::move(filter);
    }

    auto node(const Address& addr) -> VirtualNode*;
    auto client(const Address& addr) -> VirtualClient*;
    auto nodes() const -> const std::map<Address, std::unique_ptr<VirtualNode>>& { return nodes_; }

    // Gateway egress.
    void send(Datagram dg, Side egress) override;

    auto external_frames() const -> const std::vector<ExternalFrame>& { return external_; }
    auto frames_delivered() const -> std::uint64_t { return delivered_; }
    auto frames_dropped() const -> std::uint64_t { return dropped_; }

    void trace(std::string_view line);

private:
    using PathKey = std::tuple<Address, Address, int>; // link ends, leg

    void from_node(const Address& node, const Datagram& dg);
    void from_client(const Datagram& dg);
    void schedule(const Datagram& dg, const LinkModel& link, const PathKey& path,
                  std::function<void(const Datagram&)> deliver);

    NetworkConfig config_;
    EventLoop loop_;
    Rng rng_;
    FrameSink* gateway_{nullptr};
    TraceSink trace_;
    std::function<bool(const Datagram&)> drop_filter_;
    std::map<Address, std::unique_ptr<VirtualNode>> nodes_;
    std::map<Address, std::unique_ptr<VirtualClient>> clients_;
    std::map<PathKey, SimTime> last_arrival_;
    std::vector<ExternalFrame> external_;
    std::uint64_t delivered_{0};
    std::uint64_t dropped_{0};
};

} // namespace coapsd::lln
