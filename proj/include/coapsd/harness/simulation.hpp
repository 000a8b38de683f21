#pragma once

#include "coapsd/gateway/gateway.hpp"
#include "coapsd/lln/network.hpp"

#include <memory>
#include <string>
#include <vector>

namespace coapsd::harness {

struct SimulationConfig {
    std::uint64_t seed{1};
    gateway::GatewayConfig gateway;
    lln::LinkModel external{lln::LinkModel::fixed(1, std::chrono::milliseconds{1})};
    bool record_trace{true};
};

// A network, its gateway, and the combined event trace.
class Simulation {
public:
    explicit Simulation(SimulationConfig config);

    auto network() -> lln::Network& { return *network_; }
    auto gateway() -> gateway::Gateway& { return *gateway_; }
    auto loop() -> lln::EventLoop& { return network_->loop(); }
    auto now() -> SimTime { return loop().now(); }

    // Nodes take the gateway endpoint and transmission parameters from the simulation.
    auto add_node(lln::NodeConfig config) -> lln::VirtualNode&;
    auto add_client(const Address& addr) -> lln::VirtualClient&;

    void at(SimTime t, std::function<void()> fn) { loop().schedule_at(t, std::move(fn)); }
    void run_until(SimTime t) { loop().run_until(t); }

    auto trace() const -> const std::vector<std::string>& { return trace_; }

private:
    SimulationConfig config_;
    std::unique_ptr<lln::Network> network_;
    std::unique_ptr<gateway::Gateway> gateway_;
    std::vector<std::string> trace_;
};

} // namespace coapsd::harness
