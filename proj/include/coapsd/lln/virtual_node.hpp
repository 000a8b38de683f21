#pragma once

#include "coapsd/coap/message.hpp"
#include "coapsd/coap/transmission.hpp"
#include "coapsd/core/datagram.hpp"
#include "coapsd/lln/link_model.hpp"
#include "coapsd/lln/reliable_sender.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace coapsd::lln {

struct ResourceSpec {
    std::string path;
    Bytes default_value;
    bool writable{true}; // false: sensor reading, PUT answers 4.05
};

enum class NotificationPolicy {
    FirstNonThenCon, // first notification after (re)registration NON, later ones CON
    AlwaysCon,
    AlwaysNon,
};

struct NodeConfig {
    Address addr;
    LinkModel link;
    std::vector<ResourceSpec> resources;
    std::map<std::string, Bytes> flash; // persistent across reboot
    std::string loader_path{"loader"};
    std::uint32_t max_age{60};
    NotificationPolicy policy{NotificationPolicy::FirstNonThenCon};
    Endpoint gateway;
    coap::TransmissionParams transmission;
};

struct Observer {
    Endpoint client;
    std::string path;
    coap::Token token;
    std::uint32_t counter{0};
    std::uint32_t max_age{60};
    coap::MessageId last_mid{0};
    unsigned retransmit_count{0};
    bool notified_since_registration{false};
};

struct BindingRecord {
    coap::BindingInfo binding;
    std::string source_resource;
    std::optional<SimTime> last_sent;
    bool deferred{false};
    TimerId pmax_timer{0};
};

// The node's dynamic state with transport bookkeeping (MIDs, retransmission counts,
// timestamps, boot epoch) stripped. Two recoveries are equivalent iff these compare equal.
struct DynamicState {
    struct ObserverView {
        Endpoint client;
        std::string path;
        coap::Token token;
        std::uint32_t counter{0};
        auto operator<=>(const ObserverView&) const = default;
    };
    struct BindingView {
        std::string source_resource;
        Address dest_addr;
        std::string dest_resource;
        std::uint32_t pmin{0};
        std::uint32_t pmax{0};
        auto operator<=>(const BindingView&) const = default;
    };

    std::map<std::string, Bytes> parameters; // writable resources only
    std::vector<ObserverView> observers;     // sorted
    std::vector<BindingView> bindings;       // sorted
    std::set<std::string> loaded_modules;

    auto operator==(const DynamicState&) const -> bool = default;
    auto describe() const -> std::string;
};

enum class NodePhase { Down, Booting, Up, Stalled };

auto to_string(NodePhase p) -> std::string_view;

struct BootRecord {
    std::uint64_t epoch{0};
    SimTime registration_sent{};
    std::optional<SimTime> acked_at;
    unsigned retransmissions{0};
    bool stalled{false};

    auto association_delay() const -> std::optional<SimDuration> {
        if (!acked_at) return std::nullopt;
        return *acked_at - registration_sent;
    }
};

struct NotificationRecord {
    std::uint64_t epoch{0};
    SimTime at{};
    Endpoint client;
    std::string path;
    coap::Token token;
    std::uint32_t observe{0};
    coap::MessageId mid{0};
    coap::MessageType type{coap::MessageType::NonConfirmable};
    bool is_registration_response{false};
};

enum class RemovalReason { Deregistered, Reset, RetransmitLimit, Crash };

auto to_string(RemovalReason r) -> std::string_view;

struct ObserverRemoval {
    SimTime at{};
    Endpoint client;
    std::string path;
    RemovalReason reason{RemovalReason::Deregistered};
    coap::MessageId mid{0}; // last notification MID
    unsigned retransmissions{0};
};

struct NodeEnv {
    Scheduler& scheduler;
    Rng& rng;
    std::function<void(const Datagram&)> send;
    std::function<void(std::string_view)> trace;
};

// Simulated constrained CoAP server. Resources, observers, bindings and loaded modules
// are volatile; flash survives crash().
class VirtualNode {
public:
    VirtualNode(NodeConfig config, NodeEnv env);

    VirtualNode(const VirtualNode&) = delete;
    auto operator=(const VirtualNode&) -> VirtualNode& = delete;

    // Resets volatile state and sends a confirmable registration to the gateway. The
    // node serves nothing else until that is acknowledged.
    void boot();
    // Drops all traffic for downtime, then boots.
    void crash(SimDuration downtime);
    void receive(const Datagram& dg);

    // Server logic for one request. Side effects (notifications) are queued and sent
    // after the response.
    auto handle_request(const coap::Message& request, const Endpoint& src)
        -> std::optional<coap::Message>;

    // A physical reading changed. When observe is set, notifications carry that value
    // (it must exceed every affected observer's counter).
    void set_resource(const std::string& path, Bytes value,
                      std::optional<std::uint32_t> observe = std::nullopt);
    void notify_observers(const std::string& path,
                          std::optional<std::uint32_t> observe = std::nullopt);

    auto addr() const -> const Address& { return config_.addr; }
    auto endpoint() const -> Endpoint { return {config_.addr, coap_default_port}; }
    auto config() const -> const NodeConfig& { return config_; }
    auto phase() const -> NodePhase { return phase_; }
    auto boot_epoch() const -> std::uint64_t { return epoch_; }

    auto resources() const -> const std::map<std::string, Bytes>& { return resources_; }
    auto resource(const std::string& path) const -> std::optional<Bytes>;
    auto observers() const -> const std::vector<Observer>& { return observers_; }
    auto bindings() const -> const std::vector<BindingRecord>& { return bindings_; }
    auto loaded_modules() const -> const std::set<std::string>& { return loaded_modules_; }
    auto flash() const -> const std::map<std::string, Bytes>& { return flash_; }
    auto dynamic_state() const -> DynamicState;

    auto boots() const -> const std::vector<BootRecord>& { return boots_; }
    auto notifications() const -> const std::vector<NotificationRecord>& { return notifications_; }
    auto removals() const -> const std::vector<ObserverRemoval>& { return removals_; }
    auto requests_handled() const -> std::uint64_t { return requests_handled_; }

private:
    struct ExchangeKey {
        Endpoint peer;
        coap::MessageId mid;
        auto operator<=>(const ExchangeKey&) const = default;
    };

    void reset_volatile();
    auto next_mid() -> coap::MessageId;
    void transmit(const Endpoint& dst, const coap::Message& msg);
    void send_registration();

    auto handle_loader(const coap::Message& req, coap::Message& resp) -> void;
    auto handle_get(const coap::Message& req, const Endpoint& src, const std::string& path,
                    coap::Message& resp) -> void;
    void resource_changed(const std::string& path, std::optional<std::uint32_t> observe);
    void send_notification(Observer& obs, bool registration_response);
    void remove_observer(const Endpoint& client, const std::string& path, RemovalReason reason);
    auto find_observer(const Endpoint& client, const std::string& path) -> Observer*;
    void binding_changed(BindingRecord& b);
    void send_binding_put(std::size_t index);
    void log(std::string_view line) const;

    NodeConfig config_;
    NodeEnv env_;
    ReliableSender sender_;
    NodePhase phase_{NodePhase::Down};
    std::uint64_t epoch_{0};
    std::uint64_t incarnation_{0};
    coap::MessageId mid_counter_{0};

    std::map<std::string, Bytes> resources_;
    std::vector<Observer> observers_;
    std::vector<BindingRecord> bindings_;
    std::set<std::string> loaded_modules_;
    std::map<std::string, Bytes> flash_;
    std::map<std::string, Bytes> upload_; // block-wise uploads in progress
    std::map<ExchangeKey, coap::Message> exchanges_;
    std::vector<std::pair<std::string, std::optional<std::uint32_t>>> deferred_changes_;

    std::vector<BootRecord> boots_;
    std::vector<NotificationRecord> notifications_;
    std::vector<ObserverRemoval> removals_;
    std::uint64_t requests_handled_{0};
};

} // namespace coapsd::lln
