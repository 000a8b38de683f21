#include "coapsd/gateway/gateway.hpp"

#include "coapsd/coap/codec.hpp"
#include "coapsd/coap/interaction.hpp"

#include <chrono>
#include <fmt/format.h>
#include <stdexcept>

namespace coapsd::gateway {

using coap::Code;
using coap::Message;
using coap::MessageType;

void GatewayConfig::validate() const {
    if (lln_prefix.contains(gateway.addr)) {
        throw std::invalid_argument("gateway address must lie outside the LLN prefix");
    }
    if (max_retransmit < 1) throw std::invalid_argument("max_retransmit must be at least 1");
}

namespace {

auto uniform01(std::mt19937_64& rng) -> double {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

auto make_recovery_config(const GatewayConfig& c) -> recovery::RecoveryConfig {
    recovery::RecoveryConfig rc;
    rc.gateway = c.gateway;
    rc.pacing_gap = c.pacing_gap;
    rc.reliability = c.reliability;
    rc.reliability.max_retransmit = c.max_retransmit;
    return rc;
}

auto make_directory_config(const GatewayConfig& c) -> sd::DirectoryConfig {
    sd::DirectoryConfig dc;
    dc.deploy_mode = c.deploy_mode;
    dc.max_retransmit = c.max_retransmit;
    dc.loader_path = c.loader_path;
    return dc;
}

} // namespace

Gateway::Gateway(GatewayConfig config, Transport& transport, Scheduler& scheduler,
                 sd::LogSink log)
    : config_{(config.validate(), std::move(config))},
      transport_{transport},
      scheduler_{scheduler},
      log_{std::move(log)},
      rng_{config_.seed},
      mid_counter_{static_cast<coap::MessageId>(rng_() & 0xFFFF)},
      directory_{make_directory_config(config_), log_},
      engine_{directory_,
              scheduler_,
              *this,
              make_recovery_config(config_),
              recovery::IdSource{[this] { return mid_counter_++; },
                                 [this] {
                                     const auto r = rng_();
                                     return coap::Token{static_cast<std::uint8_t>(r),
                                                        static_cast<std::uint8_t>(r >> 8),
                                                        static_cast<std::uint8_t>(r >> 16),
                                                        static_cast<std::uint8_t>(r >> 24)};
                                 }},
              [this] { return uniform01(rng_); },
              log_} {}

void Gateway::log(std::string_view line) const {
    if (log_) log_(line);
}

void Gateway::send_to(const Datagram& dg) {
    transport_.send(dg, config_.lln_prefix.contains(dg.dst.addr) ? Side::Lln : Side::External);
}

void Gateway::forward(const Datagram& dg, Side ingress) {
    ++stats_.frames_in;
    const auto t0 = std::chrono::steady_clock::now();
    const auto decoded = coap::decode(dg.payload);
    if (!decoded) {
        ++stats_.malformed;
        log(fmt::format("Malformed frame SRC<{}> DST<{}> ({}), forwarded untouched",
                        dg.src.to_string(), dg.dst.to_string(), coap::to_string(decoded.error)));
        if (dg.dst.addr != config_.gateway.addr) {
            ++stats_.forwarded;
            send_to(dg);
        }
        return;
    }
    const Message& msg = *decoded;

    if (dg.dst.addr == config_.gateway.addr) {
        ++stats_.terminated;
        terminate(dg, msg);
        return;
    }

    if (config_.interception_enabled) {
        log(fmt::format("Intercepting Started-- SRC<{}> DST<{}>", dg.src.to_string(),
                        dg.dst.to_string()));
        const auto now = scheduler_.now();
        auto effect = sd::SdEffect::none();
        if (config_.lln_prefix.contains(dg.dst.addr)) {
            effect = directory_.intercept_from_internet(msg, dg.src, dg.dst, now);
        } else if (config_.lln_prefix.contains(dg.src.addr)) {
            effect = directory_.intercept_from_lln(msg, dg.src, dg.dst, now);
        }
        const auto t1 = std::chrono::steady_clock::now();
        stats_.overhead_us.push_back(
            std::chrono::duration<double, std::micro>(t1 - t0).count());
        if (effect.kind != sd::EffectKind::NoEffect) {
            effects_.push_back({now, ingress, dg.src, dg.dst, msg.mid, effect});
        }
        log("Intercepting Ended");
    }

    if (consume_replay_response(dg, msg)) return;
    ++stats_.forwarded;
    send_to(dg);
}

void Gateway::terminate(const Datagram& dg, const Message& msg) {
    if (coap::is_registration(msg) && config_.lln_prefix.contains(dg.src.addr)) {
        const std::pair key{dg.src, msg.mid};
        if (auto it = registration_acks_.find(key); it != registration_acks_.end()) {
            send_to(Datagram{config_.gateway, dg.src, coap::encode(it->second)});
            return;
        }
        ++stats_.registrations;
        log(fmt::format("Server Registration Request from [{}]", dg.src.addr.to_string()));
        Message ack = coap::make_piggybacked(msg, Code::Changed);
        if (msg.type != MessageType::Confirmable) {
            ack.type = MessageType::NonConfirmable;
            ack.mid = mid_counter_++;
        }
        registration_acks_[key] = ack;
        // The acknowledgement leaves before any replay traffic.
        send_to(Datagram{config_.gateway, dg.src, coap::encode(ack)});
        engine_.on_registration(dg.src.addr);
        return;
    }
    if (consume_replay_response(dg, msg)) return;
    if (msg.type == MessageType::Confirmable) {
        Message reply = msg.is_request() ? coap::make_piggybacked(msg, Code::NotFound)
                                         : coap::make_empty_ack(msg.mid);
        send_to(Datagram{config_.gateway, dg.src, coap::encode(reply)});
    }
}

auto Gateway::consume_replay_response(const Datagram& dg, const Message& msg) -> bool {
    if (matchers_.empty()) return false;
    if (msg.type != MessageType::Acknowledgement && msg.type != MessageType::Reset) return false;

    auto pick = matchers_.end();
    for (auto it = matchers_.begin(); it != matchers_.end(); ++it) {
        const auto& m = it->second;
        if (m.node != dg.src || m.spoofed != dg.dst) continue;
        if (!m.token.empty() && msg.code != Code::Empty && msg.token == m.token) {
            pick = it;
            break;
        }
        if (pick == matchers_.end() && msg.mid == m.mid) pick = it;
    }
    if (pick == matchers_.end()) return false;

    auto handler = std::move(pick->second.handler);
    const Matcher matched = pick->second;
    // Retransmitted injections share the exchange; retire all of them.
    for (auto it = matchers_.begin(); it != matchers_.end();) {
        const auto& m = it->second;
        if (m.node == matched.node && m.spoofed == matched.spoofed && m.mid == matched.mid &&
            m.token == matched.token) {
            scheduler_.cancel(m.expiry);
            it = matchers_.erase(it);
        } else {
            ++it;
        }
    }
    ++stats_.suppressed;
    log(fmt::format("Suppressed replay response {} from {}", msg.summary(), dg.src.to_string()));
    if (handler) handler(msg);
    return true;
}

void Gateway::inject(const recovery::ReplayStep& step, recovery::ResponseHandler on_response) {
    ++stats_.injected;
    if (step.suppress_response || step.spoofed_source == config_.gateway) {
        const auto id = next_matcher_++;
        Matcher m;
        m.node = step.destination;
        m.spoofed = step.spoofed_source;
        m.token = step.message.token;
        m.mid = step.message.mid;
        m.handler = std::move(on_response);
        m.expiry = scheduler_.schedule_after(coap::exchange_lifetime,
                                             [this, id] { matchers_.erase(id); });
        matchers_.emplace(id, std::move(m));
    }
    log(fmt::format("Replay {} as {} -> {}", step.message.summary(),
                    step.spoofed_source.to_string(), step.destination.to_string()));
    transport_.send(Datagram{step.spoofed_source, step.destination, coap::encode(step.message)},
                    Side::Lln);
}

} // namespace coapsd::gateway
