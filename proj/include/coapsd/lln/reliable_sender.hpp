#pragma once

#include "coapsd/coap/message.hpp"
#include "coapsd/coap/transmission.hpp"
#include "coapsd/core/datagram.hpp"
#include "coapsd/lln/link_model.hpp"

#include <functional>
#include <map>

namespace coapsd::lln {

// Confirmable-message bookkeeping for one simulated endpoint: exponential back-off
// retransmission and ACK/RST matching by (peer, MID).
class ReliableSender {
public:
    struct Callbacks {
        std::function<void(const coap::Message&)> on_reply; // ACK or RST
        std::function<void(unsigned)> on_retransmit;        // called with 1..max_retransmit
        std::function<void()> on_give_up;
    };

    ReliableSender(Scheduler& scheduler, Rng& rng, coap::TransmissionParams params,
                   std::function<void(const Datagram&)> transmit);
    ~ReliableSender();

    ReliableSender(const ReliableSender&) = delete;
    auto operator=(const ReliableSender&) -> ReliableSender& = delete;

    void send(Datagram dg, coap::MessageId mid, Callbacks cb);
    // Returns true when the reply matched an outstanding exchange.
    auto on_reply(const Endpoint& from, const coap::Message& reply) -> bool;
    void cancel(const Endpoint& peer, coap::MessageId mid);
    void clear();

    auto outstanding() const -> std::size_t { return pending_.size(); }
    auto params() const -> const coap::TransmissionParams& { return params_; }

private:
    struct Pending {
        Datagram dg;
        Callbacks cb;
        unsigned retransmissions{0};
        SimDuration timeout{};
        TimerId timer{0};
    };
    using Key = std::pair<Endpoint, coap::MessageId>;

    void arm(const Key& key);
    void on_timeout(const Key& key);

    Scheduler& scheduler_;
    Rng& rng_;
    coap::TransmissionParams params_;
    std::function<void(const Datagram&)> transmit_;
    std::map<Key, Pending> pending_;
};

} // namespace coapsd::lln
