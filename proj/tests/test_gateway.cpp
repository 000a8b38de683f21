#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coapsd/coap/codec.hpp"
#include "coapsd/coap/interaction.hpp"
#include "coapsd/gateway/gateway.hpp"
#include "coapsd/harness/simulation.hpp"
#include "coapsd/lln/event_loop.hpp"

using namespace coapsd;
using namespace coapsd::coap;
using namespace std::chrono_literals;

namespace {

const Endpoint gw{Address::from_string("cccc::1"), 5683};
const Endpoint client{Address::from_string("cccc::3"), 49152};
const Endpoint node{Address::from_string("aaaa::c30c:0:0:2"), 5683};

struct Recorder final : Transport {
    void send(Datagram dg, Side egress) override { sent.emplace_back(std::move(dg), egress); }
    std::vector<std::pair<Datagram, Side>> sent;
};

struct Rig {
    explicit Rig(bool intercept = true) {
        gateway::GatewayConfig cfg;
        cfg.interception_enabled = intercept;
        gwy = std::make_unique<gateway::Gateway>(cfg, transport, loop);
    }
    lln::EventLoop loop;
    Recorder transport;
    std::unique_ptr<gateway::Gateway> gwy;
};

auto put_frame() -> Datagram {
    Message m;
    m.code = Code::Put;
    m.mid = 42;
    m.token = {0x01};
    m.options.set_path("a/lb");
    m.options.content_format = 0;
    m.payload = to_bytes("10");
    return {client, node, encode(m)};
}

auto node_config() -> lln::NodeConfig {
    lln::NodeConfig c;
    c.addr = node.addr;
    c.link = lln::LinkModel::fixed(2, 10ms);
    c.resources = {{"a/lb", to_bytes("0"), true},
                   {"a/m", to_bytes("0"), true},
                   {"gpio/btn", to_bytes("0"), false}};
    return c;
}

} // namespace

TEST_CASE("interception off forwards and leaves the directory alone") {
    Rig rig{false};
    const auto dg = put_frame();
    rig.gwy->forward(dg, Side::External);
    REQUIRE(rig.transport.sent.size() == 1);
    CHECK(rig.transport.sent[0].first == dg);
    CHECK(rig.transport.sent[0].second == Side::Lln);
    CHECK(rig.gwy->directory().size() == 0);
}

TEST_CASE("interception on forwards byte-identically and records the PUT") {
    Rig rig;
    const auto dg = put_frame();
    rig.gwy->forward(dg, Side::External);
    REQUIRE(rig.transport.sent.size() == 1);
    CHECK(rig.transport.sent[0].first == dg);
    CHECK(rig.gwy->directory().size() == 1);
    REQUIRE(rig.gwy->effects().size() == 1);
    CHECK(rig.gwy->effects()[0].effect.kind == sd::EffectKind::Created);
    rig.gwy->forward(dg, Side::External);
    CHECK(rig.gwy->effects().back().effect.kind == sd::EffectKind::Updated);
    CHECK(rig.gwy->stats().overhead_us.size() == 2);
}

TEST_CASE("registration is answered by the gateway and not forwarded") {
    Rig rig;
    const auto reg = registration_request(77, {0x11});
    rig.gwy->forward({node, gw, encode(reg)}, Side::Lln);
    REQUIRE(rig.transport.sent.size() == 1);
    const auto [dg, side] = rig.transport.sent[0];
    CHECK(side == Side::Lln);
    CHECK(dg.src == gw);
    CHECK(dg.dst == node);
    const auto ack = decode(dg.payload);
    REQUIRE(ack);
    CHECK(ack->type == MessageType::Acknowledgement);
    CHECK(ack->code == Code::Changed);
    CHECK(ack->mid == 77);
    // A retransmitted registration gets the same ACK and no second lookup.
    rig.gwy->forward({node, gw, encode(reg)}, Side::Lln);
    CHECK(rig.transport.sent.size() == 2);
    CHECK(rig.transport.sent[1].first == dg);
    CHECK(rig.gwy->stats().registrations == 1);
    CHECK(rig.gwy->directory().snapshot().nodes.contains(node.addr));
}

TEST_CASE("malformed frames pass through untouched with no directory effect") {
    Rig rig;
    const Datagram bad{client, node, Bytes{0x40, 0x01, 0x00}};
    rig.gwy->forward(bad, Side::External);
    REQUIRE(rig.transport.sent.size() == 1);
    CHECK(rig.transport.sent[0].first == bad);
    CHECK(rig.gwy->stats().malformed == 1);
    CHECK(rig.gwy->effects().empty());
    CHECK(rig.gwy->directory().size() == 0);
}

TEST_CASE("replay matchers expire after the exchange lifetime") {
    Rig rig;
    recovery::ReplayStep step;
    step.message.code = Code::Put;
    step.message.mid = 5;
    step.message.token = {0x09};
    step.spoofed_source = client;
    step.destination = node;
    bool called = false;
    rig.gwy->inject(step, [&](const Message&) { called = true; });
    CHECK(rig.gwy->pending_matchers() == 1);
    REQUIRE(rig.transport.sent.size() == 1);
    CHECK(rig.transport.sent[0].first.src == client);
    rig.loop.run_until(SimTime{exchange_lifetime + 1s});
    CHECK(rig.gwy->pending_matchers() == 0);
    // A late response is now an ordinary frame and gets forwarded.
    rig.gwy->forward({node, client, encode(make_piggybacked(step.message, Code::Changed))},
                     Side::Lln);
    CHECK_FALSE(called);
    CHECK(rig.transport.sent.back().second == Side::External);
}

TEST_CASE("a replay response is consumed by token, with MID as fallback") {
    Rig rig;
    recovery::ReplayStep step;
    step.message.code = Code::Get;
    step.message.mid = 5;
    step.message.token = {0x0b, 0x2a};
    step.message.options.observe = 10;
    step.spoofed_source = client;
    step.destination = node;
    int calls = 0;
    rig.gwy->inject(step, [&](const Message&) { ++calls; });
    rig.gwy->inject(step, [&](const Message&) { ++calls; });
    CHECK(rig.gwy->pending_matchers() == 2);
    auto resp = make_piggybacked(step.message, Code::Content);
    resp.mid = 999;
    rig.gwy->forward({node, client, encode(resp)}, Side::Lln);
    CHECK(calls == 1);
    CHECK(rig.gwy->pending_matchers() == 0);
    CHECK(rig.gwy->stats().forwarded == 0);

    rig.gwy->inject(step, {});
    rig.gwy->forward({node, client, encode(make_empty_ack(5))}, Side::Lln);
    CHECK(rig.gwy->pending_matchers() == 0);
    CHECK(rig.gwy->stats().forwarded == 0);
}

TEST_CASE("end to end: replay traffic in the simulated network") {
    harness::SimulationConfig cfg;
    cfg.seed = 12;
    harness::Simulation sim{cfg};
    auto& n = sim.add_node(node_config());
    lln::NodeConfig other = node_config();
    other.addr = Address::from_string("aaaa::3");
    auto& dst = sim.add_node(other);
    auto& c = sim.add_client(client.addr);

    std::vector<Datagram> to_node;
    sim.network().set_drop_filter([&](const Datagram& dg) {
        if (dg.dst.addr == n.addr()) to_node.push_back(dg);
        return false;
    });
    sim.at(SimTime{0}, [&] {
        n.boot();
        dst.boot();
    });
    sim.at(SimTime{1s}, [&] { c.put(n.addr(), "a/lb", to_bytes("10")); });
    sim.at(SimTime{2s}, [&] { c.observe(n.addr(), "gpio/btn", Token{0x0b, 0x2a}); });
    sim.at(SimTime{3s}, [&] { c.bind(n.addr(), "gpio/btn", {dst.addr(), "a/m", 0, 0}); });
    sim.at(SimTime{5s}, [&] { n.crash(1s); });
    std::size_t external_before = 0;
    sim.at(SimTime{5500ms}, [&] {
        external_before = sim.network().external_frames().size();
        to_node.clear();
    });
    sim.run_until(SimTime{20s});

    const auto& reports = sim.gateway().engine().reports();
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].complete);
    CHECK(reports[0].steps.size() == 3);
    // Replay responses never leave the gateway on the external side.
    CHECK(sim.network().external_frames().size() == external_before);

    REQUIRE(n.observers().size() == 1);
    CHECK(n.observers()[0].client.addr == client.addr);
    CHECK(n.observers()[0].client.addr != gw.addr);

    bool saw_bind = false;
    bool saw_put = false;
    for (const auto& dg : to_node) {
        const auto m = decode(dg.payload);
        if (!m || !m->is_request()) continue;
        if (m->options.binding) {
            saw_bind = true;
            CHECK(dg.src.addr == gw.addr);
        } else if (m->code == Code::Put) {
            saw_put = true;
            CHECK(dg.src.addr == client.addr);
        }
    }
    CHECK(saw_bind);
    CHECK(saw_put);
    CHECK(n.bindings().size() == 1);
    CHECK(n.resource("a/lb") == to_bytes("10"));
}
