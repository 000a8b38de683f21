#pragma once

#include "coapsd/coap/interaction.hpp"
#include "coapsd/coap/message.hpp"
#include "coapsd/core/address.hpp"
#include "coapsd/core/sim_time.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace coapsd::sd {

// Numeric codes match the entry-type values printed in SD logs.
enum class EntryType : std::uint8_t {
    Put = 2,
    Observe = 5,
    Bind = 6,
    Deploy = 7,
};

auto to_string(EntryType t) -> std::string_view;

enum class DeployMode {
    FilenameOnly, // store the file name, node reloads from its flash
    BlockCapture, // store every block, replay the whole transfer
};

struct DeployInfo {
    std::string filename;
    std::optional<std::vector<Bytes>> blocks; // BlockCapture only
    std::uint16_t block_size{0};
    std::string loader_path;

    auto operator==(const DeployInfo&) const -> bool = default;
};

using EntryId = std::uint64_t;

struct SdEntry {
    EntryId id{0};
    EntryType type{EntryType::Put};
    Endpoint client;
    Endpoint server;
    std::string uri_path;
    coap::Token token;
    coap::MessageId mid{0};
    std::uint32_t observe_counter{0};
    std::uint32_t retransmit_counter{0};
    Bytes value;
    std::optional<std::uint16_t> content_format;
    std::optional<coap::BindingInfo> binding;
    std::optional<DeployInfo> deploy;
    SimTime created_at{};
    SimTime updated_at{};

    auto operator==(const SdEntry&) const -> bool = default;
};

enum class EffectKind { Created, Updated, Removed, NoEffect };

auto to_string(EffectKind k) -> std::string_view;

struct SdEffect {
    EffectKind kind{EffectKind::NoEffect};
    std::optional<EntryId> entry;

    static auto none() -> SdEffect { return {}; }
    auto operator==(const SdEffect&) const -> bool = default;
};

enum class Registration { New, KnownEmpty, KnownWithState };

auto to_string(Registration r) -> std::string_view;

struct DirectoryConfig {
    DeployMode deploy_mode{DeployMode::FilenameOnly};
    unsigned max_retransmit{4};
    std::string loader_path{"loader"};
};

// Everything observable about the directory: entries plus the node association set.
struct DirectorySnapshot {
    std::vector<SdEntry> entries; // ascending id
    std::set<Address> nodes;

    auto operator==(const DirectorySnapshot&) const -> bool = default;
};

using LogSink = std::function<void(std::string_view)>;

// The state directory. Mutations are serialized by an internal mutex; snapshot()
// returns a consistent copy.
class StateDirectory {
public:
    explicit StateDirectory(DirectoryConfig config = {}, LogSink log = {});

    // Request-direction traffic (external network toward the LLN).
    auto intercept_from_internet(const coap::Message& msg, const Endpoint& src,
                                 const Endpoint& dst, SimTime now) -> SdEffect;
    // Traffic originating inside the LLN.
    auto intercept_from_lln(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                            SimTime now) -> SdEffect;

    // Entries whose server address matches, oldest first.
    auto entries_for_server(const Address& server) const -> std::vector<SdEntry>;
    auto register_node(const Address& node) -> Registration;

    auto find(EntryId id) const -> std::optional<SdEntry>;
    auto snapshot() const -> DirectorySnapshot;
    auto size() const -> std::size_t;
    auto config() const -> const DirectoryConfig& { return config_; }

    // One entry per line, tab-separated. See write_snapshot_line().
    void write_snapshot(std::ostream& out) const;

private:
    struct PendingDeploy {
        std::string filename;
        std::string loader_path;
        std::vector<Bytes> blocks;
        std::uint16_t block_size{0};
        std::uint32_t next_num{0};
    };

    auto on_put(const coap::Message& msg, const Endpoint& src, const Endpoint& dst, SimTime now)
        -> SdEffect;
    auto on_observe_register(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                             SimTime now) -> SdEffect;
    auto on_observe_deregister(const coap::Message& msg, const Endpoint& src, const Endpoint& dst)
        -> SdEffect;
    auto on_binding(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                    SimTime now) -> SdEffect;
    auto on_deploy_block(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                         SimTime now) -> SdEffect;
    auto on_client_ack(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                       SimTime now) -> SdEffect;
    auto on_client_reset(const coap::Message& msg, const Endpoint& src, const Endpoint& dst)
        -> SdEffect;
    auto on_notification(const coap::Message& msg, const Endpoint& src, const Endpoint& dst,
                         SimTime now) -> SdEffect;

    auto create(SdEntry entry, SimTime now) -> SdEffect;
    auto remove(EntryId id) -> SdEffect;
    void log_entry(std::string_view prefix, const SdEntry& e) const;
    void log(std::string_view line) const;

    DirectoryConfig config_;
    LogSink log_;
    mutable std::mutex mutex_;
    std::map<EntryId, SdEntry> entries_;
    std::set<Address> nodes_;
    std::map<std::tuple<Endpoint, Endpoint, std::string, std::string>, PendingDeploy> pending_;
    EntryId next_id_{1};
};

// "<type>\t<client>\t<server>\t<uri>\t<token>\t<mid>\t<obs>\t<ret>\t<value-hex>\t<cf>\t<binding>\t<deploy>\t<created_us>\t<updated_us>"
auto write_snapshot_line(const SdEntry& e) -> std::string;

} // namespace coapsd::sd
