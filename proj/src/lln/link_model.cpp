#include "coapsd/lln/link_model.hpp"

#include <stdexcept>

namespace coapsd::lln {

auto uniform01(Rng& rng) -> double {
    // 53 random bits mapped onto [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

auto to_string(Rdc rdc) -> std::string_view {
    return rdc == Rdc::NullRdc ? "nullrdc" : "contikimac";
}

auto parse_rdc(std::string_view text) -> std::optional<Rdc> {
    if (text == "nullrdc" || text == "NullRDC") return Rdc::NullRdc;
    if (text == "contikimac" || text == "ContikiMAC") return Rdc::ContikiMac;
    return std::nullopt;
}

auto LinkModel::defaults(Rdc rdc, unsigned hops, double loss) -> LinkModel {
    LinkModel m;
    m.hops = hops;
    m.rdc = rdc;
    m.loss_prob = loss;
    if (rdc == Rdc::NullRdc) {
        m.per_hop_min_ms = 5.0;
        m.per_hop_max_ms = 15.0;
    } else {
        m.per_hop_min_ms = 50.0;
        m.per_hop_max_ms = 250.0;
    }
    return m;
}

auto LinkModel::fixed(unsigned hops, SimDuration per_hop) -> LinkModel {
    LinkModel m;
    m.hops = hops;
    m.per_hop_min_ms = to_ms(per_hop);
    m.per_hop_max_ms = to_ms(per_hop);
    return m;
}

void LinkModel::validate() const {
    if (hops == 0) throw std::invalid_argument("link needs at least one hop");
    if (per_hop_min_ms < 0.0 || per_hop_max_ms < per_hop_min_ms) {
        throw std::invalid_argument("per-hop delay range must satisfy 0 <= min <= max");
    }
    if (!(loss_prob >= 0.0 && loss_prob < 1.0)) {
        throw std::invalid_argument("loss probability must be in [0, 1)");
    }
}

auto LinkModel::mean_one_way_ms() const -> double {
    return hops * (per_hop_min_ms + per_hop_max_ms) / 2.0;
}

auto LinkModel::sample(Rng& rng) const -> std::optional<SimDuration> {
    double total_ms = 0.0;
    bool lost = false;
    for (unsigned h = 0; h < hops; ++h) {
        if (loss_prob > 0.0 && uniform01(rng) < loss_prob) lost = true;
        total_ms += per_hop_min_ms + (per_hop_max_ms - per_hop_min_ms) * uniform01(rng);
    }
    if (lost) return std::nullopt;
    return sim_ms(total_ms);
}

} // namespace coapsd::lln
