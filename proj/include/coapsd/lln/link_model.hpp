#pragma once

#include "coapsd/core/sim_time.hpp"

#include <optional>
#include <random>
#include <string_view>

namespace coapsd::lln {

// Every stochastic draw in a scenario comes from one of these.
using Rng = std::mt19937_64;

// Uniform double in [0, 1). Portable across standard libraries, unlike
// std::uniform_real_distribution.
auto uniform01(Rng& rng) -> double;

enum class Rdc { NullRdc, ContikiMac };

auto to_string(Rdc rdc) -> std::string_view;
auto parse_rdc(std::string_view text) -> std::optional<Rdc>;

// Multi-hop path between the gateway and a node. Each hop adds a uniform delay
// sample and may drop the frame.
struct LinkModel {
    unsigned hops{1};
    Rdc rdc{Rdc::NullRdc};
    double per_hop_min_ms{5.0};
    double per_hop_max_ms{15.0};
    double loss_prob{0.0};

    // NullRDC: 5-15 ms per hop. ContikiMAC: 50-250 ms per hop, dominated by waiting
    // for the receiver's wake-up.
    static auto defaults(Rdc rdc, unsigned hops = 1, double loss = 0.0) -> LinkModel;
    // Degenerate distribution: every hop takes exactly per_hop.
    static auto fixed(unsigned hops, SimDuration per_hop) -> LinkModel;

    // Throws std::invalid_argument on hops == 0, negative delays, min > max, or
    // loss outside [0, 1).
    void validate() const;

    auto mean_one_way_ms() const -> double;

    // One traversal: nullopt if any hop drops the frame.
    auto sample(Rng& rng) const -> std::optional<SimDuration>;
};

} // namespace coapsd::lln
