#pragma once

#include "coapsd/coap/message.hpp"
#include "coapsd/coap/transmission.hpp"
#include "coapsd/core/address.hpp"
#include "coapsd/core/transport.hpp"
#include "coapsd/recovery/recovery_engine.hpp"
#include "coapsd/sd/state_directory.hpp"

#include <map>
#include <random>
#include <vector>

namespace coapsd::gateway {

struct GatewayConfig {
    Prefix lln_prefix{*Prefix::parse("aaaa::/64")};
    Endpoint gateway{Address::from_string("cccc::1"), coap_default_port};
    bool interception_enabled{true};
    sd::DeployMode deploy_mode{sd::DeployMode::FilenameOnly};
    SimDuration pacing_gap{std::chrono::milliseconds{50}};
    unsigned max_retransmit{4};
    coap::TransmissionParams reliability;
    std::string loader_path{"loader"};
    std::uint64_t seed{0x5d};

    void validate() const; // throws std::invalid_argument
};

struct GatewayStats {
    std::uint64_t frames_in{0};
    std::uint64_t forwarded{0};
    std::uint64_t malformed{0};
    std::uint64_t terminated{0}; // addressed to the gateway itself
    std::uint64_t suppressed{0};
    std::uint64_t registrations{0};
    std::uint64_t injected{0};
    std::vector<double> overhead_us; // wall clock per intercepted frame
};

// An intercepted frame that changed the directory.
struct InterceptRecord {
    SimTime at{};
    Side ingress{Side::External};
    Endpoint src;
    Endpoint dst;
    coap::MessageId mid{0};
    sd::SdEffect effect;
};

// In-path middlebox between the external network and the LLN. Hosts the state
// directory and the registration resource, and injects replay traffic.
class Gateway final : public FrameSink, public recovery::Injector {
public:
    Gateway(GatewayConfig config, Transport& transport, Scheduler& scheduler,
            sd::LogSink log = {});

    void forward(const Datagram& dg, Side ingress) override;
    void inject(const recovery::ReplayStep& step, recovery::ResponseHandler on_response) override;

    auto directory() -> sd::StateDirectory& { return directory_; }
    auto directory() const -> const sd::StateDirectory& { return directory_; }
    auto engine() -> recovery::RecoveryEngine& { return engine_; }
    auto config() const -> const GatewayConfig& { return config_; }
    auto stats() const -> const GatewayStats& { return stats_; }
    auto pending_matchers() const -> std::size_t { return matchers_.size(); }
    auto effects() const -> const std::vector<InterceptRecord>& { return effects_; }

private:
    struct Matcher {
        Endpoint node;
        Endpoint spoofed;
        coap::Token token;
        coap::MessageId mid{0};
        recovery::ResponseHandler handler;
        TimerId expiry{0};
    };

    void terminate(const Datagram& dg, const coap::Message& msg);
    auto consume_replay_response(const Datagram& dg, const coap::Message& msg) -> bool;
    void send_to(const Datagram& dg);
    void log(std::string_view line) const;

    GatewayConfig config_;
    Transport& transport_;
    Scheduler& scheduler_;
    sd::LogSink log_;
    std::mt19937_64 rng_;
    coap::MessageId mid_counter_{0};
    sd::StateDirectory directory_;
    recovery::RecoveryEngine engine_;
    std::map<std::uint64_t, Matcher> matchers_;
    std::uint64_t next_matcher_{1};
    std::map<std::pair<Endpoint, coap::MessageId>, coap::Message> registration_acks_;
    GatewayStats stats_;
    std::vector<InterceptRecord> effects_;
};

} // namespace coapsd::gateway
