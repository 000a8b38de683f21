#pragma once

#include "coapsd/core/sim_time.hpp"

#include <chrono>

namespace coapsd::coap {

// Confirmable-message retransmission parameters (Contiki CoAP engine defaults).
struct TransmissionParams {
    SimDuration ack_timeout{std::chrono::milliseconds{3000}};
    double ack_random_factor{1.5};
    unsigned max_retransmit{4};
};

// How long a sender keeps state about an exchange (RFC 7252 EXCHANGE_LIFETIME).
inline constexpr SimDuration exchange_lifetime = std::chrono::seconds{247};

} // namespace coapsd::coap
