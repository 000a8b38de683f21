#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coapsd/sd/state_directory.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace coapsd;
using namespace coapsd::coap;
using sd::EffectKind;
using sd::EntryType;

namespace {

const Endpoint client{Address::from_string("cccc::3"), 49152};
const Endpoint client2{Address::from_string("cccc::4"), 49153};
const Endpoint node{Address::from_string("aaaa::c30c:0:0:2"), 5683};
const Endpoint node2{Address::from_string("aaaa::c30c:0:0:3"), 5683};

auto put(std::string_view path, std::string_view value, MessageId mid = 1) -> Message {
    Message m;
    m.code = Code::Put;
    m.mid = mid;
    m.options.set_path(path);
    m.options.content_format = 0;
    m.payload = to_bytes(value);
    return m;
}

auto observe(std::string_view path, std::uint32_t obs, Token token = {0x0b, 0x2a},
             MessageId mid = 2) -> Message {
    Message m;
    m.code = Code::Get;
    m.mid = mid;
    m.token = std::move(token);
    m.options.set_path(path);
    m.options.observe = obs;
    return m;
}

auto notification(std::uint32_t obs, MessageId mid, MessageType type = MessageType::Confirmable,
                  Token token = {0x0b, 0x2a}) -> Message {
    Message m;
    m.type = type;
    m.code = Code::Content;
    m.mid = mid;
    m.token = std::move(token);
    m.options.observe = obs;
    m.payload = to_bytes("1");
    return m;
}

auto types_of(const std::vector<sd::SdEntry>& es) -> std::vector<int> {
    std::vector<int> out;
    for (const auto& e : es) out.push_back(static_cast<int>(e.type));
    return out;
}

// No two OBSERVE entries share (client, server, path); no two PUT entries share (server, path).
void check_unique(const sd::StateDirectory& dir) {
    std::set<std::tuple<Endpoint, Endpoint, std::string>> obs;
    std::set<std::pair<Endpoint, std::string>> puts;
    for (const auto& e : dir.snapshot().entries) {
        if (e.type == EntryType::Observe) {
            REQUIRE(obs.insert({e.client, e.server, e.uri_path}).second);
        } else if (e.type == EntryType::Put) {
            REQUIRE(puts.insert({e.server, e.uri_path}).second);
        }
    }
}

} // namespace

TEST_CASE("PUT creates an ET 2 entry, a second PUT updates it") {
    sd::StateDirectory dir;
    auto eff = dir.intercept_from_internet(put("/a/lb", "10"), client, node, SimTime{1});
    CHECK(eff.kind == EffectKind::Created);
    auto es = dir.entries_for_server(node.addr);
    REQUIRE(es.size() == 1);
    CHECK(es[0].type == EntryType::Put);
    CHECK(static_cast<int>(es[0].type) == 2);
    CHECK(es[0].value == to_bytes("10"));

    dir.intercept_from_internet(put("s/t", "18"), client, node, SimTime{2});
    eff = dir.intercept_from_internet(put("s/t", "20", 5), client, node, SimTime{3});
    CHECK(eff.kind == EffectKind::Updated);
    es = dir.entries_for_server(node.addr);
    REQUIRE(es.size() == 2);
    CHECK(es[1].value == to_bytes("20"));
    check_unique(dir);
}

TEST_CASE("deregister without a relationship has no effect") {
    sd::StateDirectory dir;
    const auto before = dir.snapshot();
    CHECK(dir.intercept_from_internet(observe("gpio/btn", 1), client, node, {}).kind ==
          EffectKind::NoEffect);
    CHECK(dir.snapshot() == before);
}

TEST_CASE("observe counters follow notifications 0, 12, 20, 44") {
    sd::StateDirectory dir;
    CHECK(dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {}).kind ==
          EffectKind::Created);
    auto e = dir.entries_for_server(node.addr).at(0);
    CHECK(e.type == EntryType::Observe);
    CHECK(e.observe_counter == 0);
    CHECK(e.retransmit_counter == 0);
    MessageId mid = 100;
    for (std::uint32_t v : {12u, 20u, 44u}) {
        CHECK(dir.intercept_from_lln(notification(v, mid++), node, client, {}).kind ==
              EffectKind::Updated);
    }
    e = dir.entries_for_server(node.addr).at(0);
    CHECK(e.observe_counter == 44);
    CHECK(e.mid == 102);
}

TEST_CASE("a CON notification seen MAX_RETRANSMIT+1 times removes the entry") {
    sd::StateDirectory dir;
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    for (int i = 0; i < 4; ++i) {
        CHECK(dir.intercept_from_lln(notification(3, 500), node, client, {}).kind ==
              EffectKind::Updated);
    }
    CHECK(dir.entries_for_server(node.addr).at(0).retransmit_counter == 3);
    CHECK(dir.intercept_from_lln(notification(3, 500), node, client, {}).kind ==
          EffectKind::Removed);
    CHECK(dir.size() == 0);
}

TEST_CASE("client ACK clears the retransmit counter; RST removes the relationship") {
    sd::StateDirectory dir;
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    dir.intercept_from_lln(notification(3, 500), node, client, {});
    dir.intercept_from_lln(notification(3, 500), node, client, {});
    CHECK(dir.entries_for_server(node.addr).at(0).retransmit_counter == 1);
    CHECK(dir.intercept_from_internet(make_empty_ack(500), client, node, {}).kind ==
          EffectKind::Updated);
    CHECK(dir.entries_for_server(node.addr).at(0).retransmit_counter == 0);
    CHECK(dir.intercept_from_internet(make_reset(999), client, node, {}).kind ==
          EffectKind::NoEffect);
    CHECK(dir.intercept_from_internet(make_reset(500), client, node, {}).kind ==
          EffectKind::Removed);
}

TEST_CASE("a plain response or an unmatched notification has no effect") {
    sd::StateDirectory dir;
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    Message resp;
    resp.type = MessageType::Acknowledgement;
    resp.code = Code::Content;
    resp.payload = to_bytes("0");
    const auto before = dir.snapshot();
    CHECK(dir.intercept_from_lln(resp, node, client, {}).kind == EffectKind::NoEffect);
    CHECK(dir.intercept_from_lln(notification(5, 1, MessageType::Confirmable, {0x99}), node,
                                 client, {})
              .kind == EffectKind::NoEffect);
    CHECK(dir.snapshot() == before);
}

TEST_CASE("two PUTs and an observe give entry types 2, 2, 5") {
    sd::StateDirectory dir;
    dir.intercept_from_internet(put("a/lb", "10"), client, node, SimTime{2000});
    dir.intercept_from_internet(put("a/m", "5"), client, node, SimTime{3000});
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, SimTime{4000});
    CHECK(types_of(dir.entries_for_server(node.addr)) == std::vector<int>{2, 2, 5});
    CHECK(dir.entries_for_server(Address::from_string("aaaa::99")).empty());
}

TEST_CASE("register_node outcomes") {
    std::vector<std::string> logs;
    sd::StateDirectory dir{{}, [&](std::string_view l) { logs.emplace_back(l); }};
    CHECK(dir.register_node(node.addr) == sd::Registration::New);
    CHECK(std::find(logs.begin(), logs.end(), "State Information not found") != logs.end());

    dir.intercept_from_internet(put("a/lb", "10"), client, node, {});
    dir.intercept_from_internet(put("a/m", "5"), client, node, {});
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    CHECK(dir.register_node(node.addr) == sd::Registration::KnownWithState);

    sd::StateDirectory dir2;
    dir2.register_node(node.addr);
    dir2.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    dir2.intercept_from_internet(observe("gpio/btn", 1), client, node, {});
    CHECK(dir2.register_node(node.addr) == sd::Registration::KnownEmpty);
}

TEST_CASE("binding and deploy entries") {
    sd::StateDirectory dir{{sd::DeployMode::BlockCapture}};
    auto b = observe("a/lb", 0, {0x01});
    b.options.binding = BindingInfo{node2.addr, "a/lb", 1, 5};
    CHECK(dir.intercept_from_internet(b, client, node, {}).kind == EffectKind::Created);

    for (std::uint32_t n = 0; n < 3; ++n) {
        Message m;
        m.code = Code::Post;
        m.mid = static_cast<MessageId>(10 + n);
        m.options.set_path("loader");
        m.options.uri_query = {"file=app.ko"};
        m.options.block1 = BlockOption{n, n < 2, 16};
        m.payload = Bytes(n < 2 ? 16 : 5, static_cast<std::uint8_t>(n));
        const auto eff = dir.intercept_from_internet(m, client, node, {});
        CHECK(eff.kind == (n < 2 ? EffectKind::NoEffect : EffectKind::Created));
    }
    const auto es = dir.entries_for_server(node.addr);
    REQUIRE(es.size() == 2);
    CHECK(es[0].type == EntryType::Bind);
    REQUIRE(es[1].deploy);
    CHECK(es[1].deploy->filename == "app.ko");
    REQUIRE(es[1].deploy->blocks);
    CHECK(es[1].deploy->blocks->size() == 3);
}

TEST_CASE("interleaved servers: directory agrees with brute-force bookkeeping") {
    std::mt19937_64 rng{2024};
    sd::StateDirectory dir;
    const std::vector<Endpoint> servers{node, node2};
    const std::vector<Endpoint> clients{client, client2};
    const std::vector<std::string> paths{"a/lb", "a/m", "gpio/btn"};
    std::map<std::pair<Endpoint, std::string>, Bytes> puts;
    std::set<std::tuple<Endpoint, Endpoint, std::string>> observes;

    for (int i = 0; i < 3000; ++i) {
        const auto& s = servers[rng() % 2];
        const auto& c = clients[rng() % 2];
        const auto& p = paths[rng() % 3];
        const auto before = dir.snapshot();
        sd::SdEffect eff;
        switch (rng() % 3) {
        case 0: {
            const auto v = std::to_string(rng() % 100);
            eff = dir.intercept_from_internet(put(p, v), c, s, SimTime{i});
            CHECK(eff.kind == (puts.contains({s, p}) ? EffectKind::Updated : EffectKind::Created));
            puts[{s, p}] = to_bytes(v);
            break;
        }
        case 1:
            eff = dir.intercept_from_internet(observe(p, 0), c, s, SimTime{i});
            CHECK(eff.kind ==
                  (observes.contains({c, s, p}) ? EffectKind::Updated : EffectKind::Created));
            observes.insert({c, s, p});
            break;
        default:
            eff = dir.intercept_from_internet(observe(p, 1), c, s, SimTime{i});
            CHECK(eff.kind ==
                  (observes.erase({c, s, p}) ? EffectKind::Removed : EffectKind::NoEffect));
            break;
        }
        if (eff.kind == EffectKind::NoEffect) REQUIRE(dir.snapshot() == before);
        check_unique(dir);
    }
    for (const auto& s : servers) {
        std::size_t expected = 0;
        for (const auto& [k, v] : puts) expected += k.first == s;
        for (const auto& k : observes) expected += std::get<1>(k) == s;
        const auto es = dir.entries_for_server(s.addr);
        CHECK(es.size() == expected);
        for (const auto& e : es) {
            CHECK(e.server == s);
            if (e.type == EntryType::Put) CHECK(puts.at({e.server, e.uri_path}) == e.value);
        }
        CHECK(std::is_sorted(es.begin(), es.end(), [](const auto& a, const auto& b) {
            return a.created_at < b.created_at;
        }));
    }
}

TEST_CASE("snapshot writer emits one line per entry") {
    sd::StateDirectory dir;
    dir.intercept_from_internet(put("a/lb", "10"), client, node, {});
    dir.intercept_from_internet(observe("gpio/btn", 0), client, node, {});
    std::ostringstream out;
    dir.write_snapshot(out);
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}
