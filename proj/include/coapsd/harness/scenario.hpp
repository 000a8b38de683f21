#pragma once

#include "coapsd/gateway/gateway.hpp"
#include "coapsd/lln/virtual_node.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace coapsd::harness {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_{line} {}
    auto line() const -> int { return line_; }

private:
    int line_;
};

struct NodeDecl {
    std::string name;
    Address addr;
    lln::LinkModel link;
    std::vector<lln::ResourceSpec> resources;
    std::map<std::string, Bytes> flash;
    lln::NotificationPolicy policy{lln::NotificationPolicy::FirstNonThenCon};
    SimTime boot_at{};
};

struct ClientDecl {
    std::string name;
    Address addr;
};

enum class EventKind {
    Put,
    Get,
    Observe,
    Deregister,
    Reset,
    Bind,
    Deploy,
    Change,
    Notify,
    Crash,
    Silence,
    Capture,
    Expect,
};

struct Event {
    SimTime at{};
    int line{0};
    EventKind kind{EventKind::Put};
    std::string client;
    std::string node;
    std::string path;
    std::string label; // observation or capture name
    Bytes value;
    std::optional<std::uint16_t> content_format;
    std::optional<std::uint32_t> observe;
    std::optional<coap::Token> token;
    coap::BindingInfo binding;
    SimDuration duration{};
    std::uint16_t block_size{64};
    bool flag{false};
    std::string expect;             // assertion kind
    std::vector<std::string> args;  // assertion operands
    std::string name;               // assertion name for reports
};

struct Scenario {
    std::string name{"scenario"};
    std::uint64_t seed{1};
    gateway::GatewayConfig gateway;
    std::vector<NodeDecl> nodes;
    std::vector<ClientDecl> clients;
    std::vector<Event> events; // nondecreasing time
    SimTime end{};

    auto find_node(std::string_view name) const -> const NodeDecl*;
    auto find_client(std::string_view name) const -> const ClientDecl*;
};

// Text format, one directive per line, '#' starts a comment:
//
//   coapsd-scenario 1
//   name <id>
//   seed <n>
//   gateway <addr> prefix <prefix> [intercept on|off] [deploy filename|blocks]
//           [pacing <ms>] [max-retransmit <n>] [ack-timeout <ms>]
//   node <name> <addr> [hops <n>] [rdc nullrdc|contikimac] [loss <p>] [fixed <ms>]
//        [policy first-non|con|non] [boot <ms>]
//   resource <node> <path> <value> [sensor]
//   flash <node> <file> <value>
//   client <name> <addr>
//   end <ms>
//   at <ms> <event...>
//
// Values are text, or hex bytes when prefixed with "hex:".
auto parse_scenario(std::string_view text) -> Scenario;
auto load_scenario(const std::string& path) -> Scenario;

auto parse_value(std::string_view text) -> Bytes;

} // namespace coapsd::harness
