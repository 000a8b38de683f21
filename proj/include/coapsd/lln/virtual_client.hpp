#pragma once

#include "coapsd/coap/message.hpp"
#include "coapsd/coap/transmission.hpp"
#include "coapsd/core/datagram.hpp"
#include "coapsd/lln/link_model.hpp"
#include "coapsd/lln/reliable_sender.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace coapsd::lln {

struct ClientEnv {
    Scheduler& scheduler;
    Rng& rng;
    std::function<void(const Datagram&)> send;
    std::function<void(std::string_view)> trace;
};

using RequestId = std::uint64_t;

struct ResponseRecord {
    RequestId request{0};
    SimTime at{};
    coap::Code code{coap::Code::Empty};
    Bytes payload;
};

struct ReceivedNotification {
    SimTime at{};
    Endpoint server;
    coap::Token token;
    std::uint32_t observe{0};
    coap::MessageId mid{0};
    coap::MessageType type{coap::MessageType::NonConfirmable};
    Bytes payload;
    bool fresh{true};
};

struct Observation {
    Endpoint server;
    std::string path;
    coap::Token token;
    std::uint16_t local_port{0};
    std::optional<std::uint32_t> last_observe;
    SimTime last_at{};
    bool reset_next{false};
};

// External CoAP client. Every request leaves from a fresh ephemeral port; an
// observation keeps its port for later deregistration and resets.
class VirtualClient {
public:
    VirtualClient(Address addr, ClientEnv env, coap::TransmissionParams params = {});

    VirtualClient(const VirtualClient&) = delete;
    auto operator=(const VirtualClient&) -> VirtualClient& = delete;

    auto put(const Address& server, const std::string& path, Bytes value,
             std::optional<std::uint16_t> content_format = 0) -> RequestId;
    auto get(const Address& server, const std::string& path) -> RequestId;
    auto observe(const Address& server, const std::string& path,
                 std::optional<coap::Token> token = std::nullopt) -> coap::Token;
    void deregister(const coap::Token& token);
    // The next notification for this token is answered with RST and forgotten.
    void reset_on_next(const coap::Token& token);
    auto bind(const Address& server, const std::string& path, const coap::BindingInfo& binding)
        -> RequestId;
    // Block-wise upload to the loader, one block per acknowledged exchange.
    void deploy(const Address& server, const std::string& filename, const Bytes& image,
                std::uint16_t block_size, const std::string& loader_path = "loader");
    // A silent client drops everything it receives.
    void set_silent(bool silent) { silent_ = silent; }

    void receive(const Datagram& dg);

    auto addr() const -> const Address& { return addr_; }
    auto responses() const -> const std::vector<ResponseRecord>& { return responses_; }
    auto notifications() const -> const std::vector<ReceivedNotification>& {
        return notifications_;
    }
    auto observation(const coap::Token& token) const -> const Observation*;
    auto observations() const -> const std::vector<Observation>& { return observations_; }
    auto deploys_completed() const -> const std::vector<std::string>& { return deploys_done_; }

private:
    struct Upload {
        Endpoint server;
        std::string filename;
        std::string loader_path;
        Bytes image;
        std::uint16_t block_size{0};
        std::uint32_t next{0};
        std::uint16_t port{0};
    };

    auto next_mid() -> coap::MessageId;
    auto fresh_token() -> coap::Token;
    auto fresh_port() -> std::uint16_t;
    auto send_request(coap::Message msg, const Endpoint& server, std::uint16_t port) -> RequestId;
    void send_block(std::size_t upload);
    void on_notification(const Datagram& dg, const coap::Message& msg);
    void log(std::string_view line) const;

    Address addr_;
    ClientEnv env_;
    ReliableSender sender_;
    coap::MessageId mid_counter_{0};
    std::uint16_t port_counter_{0};
    RequestId next_request_{1};
    bool silent_{false};

    std::vector<Observation> observations_;
    std::vector<Upload> uploads_;
    std::vector<ResponseRecord> responses_;
    std::vector<ReceivedNotification> notifications_;
    std::vector<std::string> deploys_done_;
};

// Observe freshness test for a new value v2 arriving after v1.
auto observe_is_fresh(std::uint32_t v1, SimTime t1, std::uint32_t v2, SimTime t2) -> bool;

} // namespace coapsd::lln
