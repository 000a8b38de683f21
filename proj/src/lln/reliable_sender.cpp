#include "coapsd/lln/reliable_sender.hpp"

namespace coapsd::lln {

ReliableSender::ReliableSender(Scheduler& scheduler, Rng& rng, coap::TransmissionParams params,
                               std::function<void(const Datagram&)> transmit)
    : scheduler_{scheduler}, rng_{rng}, params_{params}, transmit_{std::move(transmit)} {}

ReliableSender::~ReliableSender() {
    clear();
}

void ReliableSender::send(Datagram dg, coap::MessageId mid, Callbacks cb) {
    const Key key{dg.dst, mid};
    cancel(key.first, key.second);
    const double factor = 1.0 + (params_.ack_random_factor - 1.0) * uniform01(rng_);
    Pending p;
    p.dg = std::move(dg);
    p.cb = std::move(cb);
    p.timeout = SimDuration{
        static_cast<std::int64_t>(static_cast<double>(params_.ack_timeout.count()) * factor)};
    auto& slot = pending_[key] = std::move(p);
    transmit_(slot.dg);
    arm(key);
}

void ReliableSender::arm(const Key& key) {
    auto& p = pending_.at(key);
    p.timer = scheduler_.schedule_after(p.timeout, [this, key] { on_timeout(key); });
}

void ReliableSender::on_timeout(const Key& key) {
    auto it = pending_.find(key);
    if (it == pending_.end()) return;
    auto& p = it->second;
    if (p.retransmissions >= params_.max_retransmit) {
        auto give_up = std::move(p.cb.on_give_up);
        pending_.erase(it);
        if (give_up) give_up();
        return;
    }
    ++p.retransmissions;
    p.timeout *= 2;
    const unsigned n = p.retransmissions;
    const Datagram dg = p.dg;
    auto on_retransmit = p.cb.on_retransmit;
    arm(key);
    transmit_(dg);
    // The callback may cancel this exchange.
    if (on_retransmit) on_retransmit(n);
}

auto ReliableSender::on_reply(const Endpoint& from, const coap::Message& reply) -> bool {
    auto it = pending_.find(Key{from, reply.mid});
    if (it == pending_.end()) return false;
    scheduler_.cancel(it->second.timer);
    auto cb = std::move(it->second.cb.on_reply);
    pending_.erase(it);
    if (cb) cb(reply);
    return true;
}

void ReliableSender::cancel(const Endpoint& peer, coap::MessageId mid) {
    auto it = pending_.find(Key{peer, mid});
    if (it == pending_.end()) return;
    scheduler_.cancel(it->second.timer);
    pending_.erase(it);
}

void ReliableSender::clear() {
    for (auto& [key, p] : pending_) scheduler_.cancel(p.timer);
    pending_.clear();
}

} // namespace coapsd::lln
