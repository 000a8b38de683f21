#include "coapsd/harness/simulation.hpp"

namespace coapsd::harness {

Simulation::Simulation(SimulationConfig config) : config_{std::move(config)} {
    config_.gateway.seed = config_.seed ^ 0x9E3779B97F4A7C15ull;
    lln::NetworkConfig nc;
    nc.lln_prefix = config_.gateway.lln_prefix;
    nc.gateway = config_.gateway.gateway;
    nc.external = config_.external;
    nc.seed = config_.seed;
    network_ = std::make_unique<lln::Network>(nc);
    if (config_.record_trace) {
        network_->set_trace([this](std::string_view line) { trace_.emplace_back(line); });
    }
    gateway_ = std::make_unique<gateway::Gateway>(
        config_.gateway, *network_, network_->loop(), [this](std::string_view line) {
            if (config_.record_trace) network_->trace(std::string{"gw "} + std::string{line});
        });
    network_->attach_gateway(gateway_.get());
}

auto Simulation::add_node(lln::NodeConfig config) -> lln::VirtualNode& {
    config.transmission = config_.gateway.reliability;
    config.transmission.max_retransmit = config_.gateway.max_retransmit;
    config.loader_path = config_.gateway.loader_path;
    return network_->add_node(std::move(config));
}

auto Simulation::add_client(const Address& addr) -> lln::VirtualClient& {
    auto params = config_.gateway.reliability;
    params.max_retransmit = config_.gateway.max_retransmit;
    return network_->add_client(addr, params);
}

} // namespace coapsd::harness
