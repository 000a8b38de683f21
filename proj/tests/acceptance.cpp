// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is the
// number of failures.

#include "coapsd/coap/codec.hpp"
#include "coapsd/harness/runner.hpp"
#include "coapsd/harness/simulation.hpp"
#include "coapsd/harness/sweep.hpp"
#include "support/random_message.hpp"

#include <algorithm>
#include <chrono>
#include <fmt/format.h>
#include <functional>
#include <map>
#include <thread>

using namespace coapsd;
using namespace std::chrono_literals;
using harness::Metric;
using lln::Rdc;

namespace {

struct Verdict {
    bool pass{true};
    std::string detail;

    void fail(std::string why) {
        if (pass) detail = std::move(why);
        pass = false;
    }
};

const Address client_addr = Address::from_string("cccc::3");
const Address client2_addr = Address::from_string("cccc::4");

auto jobs() -> unsigned { return std::max(1u, std::thread::hardware_concurrency()); }

auto scenario_path(std::string_view name) -> std::string {
    return std::string{COAPSD_SCENARIO_DIR} + "/" + std::string{name} + ".scn";
}

auto sensor_node(const Address& addr, lln::LinkModel link) -> lln::NodeConfig {
    lln::NodeConfig c;
    c.addr = addr;
    c.link = link;
    c.resources = {{"gpio/btn", to_bytes("0"), false}, {"a/lb", to_bytes("0"), true}};
    return c;
}

auto criterion1() -> Verdict {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const auto sc = harness::load_scenario(scenario_path("fig12_19"));
    const auto r = harness::run_scenario(sc);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& a : r.assertions) {
        if (!a.passed) v.fail(fmt::format("{}: {}", a.name, a.detail));
    }
    const std::vector<std::string> required{"sd-before-crash",    "lb-restored",
                                            "m-restored",         "observer-is-client",
                                            "observe-continues",  "fresh-mid-space",
                                            "state-restored"};
    for (const auto& name : required) {
        const bool found = std::any_of(r.assertions.begin(), r.assertions.end(),
                                       [&](const auto& a) { return a.name == name && a.passed; });
        if (!found) v.fail("missing assertion " + name);
    }
    if (secs >= 5.0) v.fail(fmt::format("took {:.2f} s", secs));
    if (v.pass) {
        v.detail = fmt::format("{} assertions, {:.3f} s wall clock", r.assertions.size(), secs);
    }
    return v;
}

auto criterion2() -> Verdict {
    Verdict v;
    harness::Simulation sim{{}};
    auto& node = sim.add_node(sensor_node(Address::from_string("aaaa::2"),
                                          lln::LinkModel::defaults(Rdc::NullRdc, 2)));
    auto& c = sim.add_client(client_addr);
    auto& dir = sim.gateway().directory();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
    auto sample = [&] {
        const auto es = dir.entries_for_server(node.addr());
        if (es.size() != 1) {
            v.fail(fmt::format("expected one entry, found {}", es.size()));
            return;
        }
        seen.emplace_back(es[0].observe_counter, es[0].retransmit_counter);
    };
    coap::Token tok;
    sim.at(SimTime{0}, [&] { node.boot(); });
    sim.at(SimTime{1s}, [&] { tok = c.observe(node.addr(), "gpio/btn"); });
    sim.at(SimTime{2s}, sample);
    std::uint32_t obs[] = {12, 20, 44};
    for (int i = 0; i < 3; ++i) {
        sim.at(SimTime{3s + i * 2s},
               [&, i] { node.set_resource("gpio/btn", to_bytes(std::to_string(i)), obs[i]); });
        sim.at(SimTime{4s + i * 2s}, sample);
    }
    sim.at(SimTime{10s}, [&] { c.deregister(tok); });
    bool removed_by_deregister = false;
    sim.at(SimTime{11s}, [&] { removed_by_deregister = dir.size() == 0; });
    sim.at(SimTime{12s}, [&] { tok = c.observe(node.addr(), "gpio/btn"); });
    sim.at(SimTime{13s}, [&] {
        if (dir.size() != 1) v.fail("second observation not recorded");
        c.reset_on_next(tok);
        node.set_resource("gpio/btn", to_bytes("9"));
    });
    sim.run_until(SimTime{20s});

    const std::vector<std::pair<std::uint32_t, std::uint32_t>> want{
        {0, 0}, {12, 0}, {20, 0}, {44, 0}};
    if (seen != want) {
        std::string got;
        for (auto [o, r] : seen) got += fmt::format("{}/{} ", o, r);
        v.fail("counter sequence " + got);
    }
    if (!removed_by_deregister) v.fail("deregister left the entry");
    if (dir.size() != 0) v.fail("RST left the entry");
    if (!node.observers().empty()) v.fail("node kept the observer after RST");
    if (v.pass) v.detail = "0/0 -> 12 -> 20 -> 44, deregister and RST remove";
    return v;
}

auto criterion3() -> Verdict {
    Verdict v;
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        lln::Rng pick{seed * 7919};
        harness::SimulationConfig cfg;
        cfg.seed = seed;
        harness::Simulation sim{cfg};
        const auto rdc = pick() % 2 ? Rdc::ContikiMac : Rdc::NullRdc;
        const unsigned hops = 1 + static_cast<unsigned>(pick() % 4);
        auto& node = sim.add_node(sensor_node(Address::from_string("aaaa::2"),
                                              lln::LinkModel::defaults(rdc, hops)));
        auto& c = sim.add_client(client_addr);
        const auto silent_at = SimTime{3s + std::chrono::milliseconds{pick() % 2000}};
        sim.at(SimTime{0}, [&] { node.boot(); });
        sim.at(SimTime{1s}, [&] { c.observe(node.addr(), "gpio/btn"); });
        sim.at(SimTime{2s}, [&] { node.set_resource("gpio/btn", to_bytes("1")); });
        sim.at(silent_at, [&] {
            c.set_silent(true);
            node.set_resource("gpio/btn", to_bytes("0"));
        });
        sim.run_until(SimTime{600s});

        const auto& removals = node.removals();
        std::vector<gateway::InterceptRecord> sd_removed;
        for (const auto& e : sim.gateway().effects()) {
            if (e.effect.kind == sd::EffectKind::Removed) sd_removed.push_back(e);
        }
        // Copies of the final notification forwarded toward the client.
        int sightings = 0;
        for (const auto& f : sim.network().external_frames()) {
            const auto m = coap::decode(f.dg.payload);
            if (!f.toward_gateway && !removals.empty() && m &&
                m->type == coap::MessageType::Confirmable && m->mid == removals[0].mid) {
                ++sightings;
            }
        }
        std::string why;
        if (removals.size() != 1 || removals[0].reason != lln::RemovalReason::RetransmitLimit) {
            why = "node did not drop the observer by retransmit limit";
        } else if (removals[0].retransmissions != 4) {
            why = fmt::format("node dropped after {} retransmissions", removals[0].retransmissions);
        } else if (sd_removed.size() != 1) {
            why = fmt::format("{} SD removals", sd_removed.size());
        } else if (sd_removed[0].mid != removals[0].mid || sd_removed[0].ingress != Side::Lln ||
                   sd_removed[0].src.addr != node.addr()) {
            why = "SD removal triggered by a different frame";
        } else if (sightings != 5) {
            why = fmt::format("{} transmissions of the final notification", sightings);
        } else if (!node.observers().empty() || sim.gateway().directory().size() != 0) {
            why = "relationship still present";
        }
        if (why.empty()) {
            ++ok;
        } else {
            v.fail(fmt::format("seed {}: {}", seed, why));
        }
    }
    if (v.pass) v.detail = fmt::format("{}/100 seeds agree on the 4th retransmission", ok);
    return v;
}

struct Coverage {
    int observers{0};
    int bindings{0};
    int modules{0};
};

// One randomized interaction sequence; returns an empty string on success.
auto oracle_run(std::uint64_t seed, Coverage& cov) -> std::string {
    lln::Rng pick{seed ^ 0xA5A5A5A5ull};
    harness::SimulationConfig cfg;
    cfg.seed = seed;
    cfg.gateway.deploy_mode = seed % 2 ? sd::DeployMode::BlockCapture : sd::DeployMode::FilenameOnly;
    harness::Simulation sim{cfg};

    const unsigned hops = 1 + static_cast<unsigned>(pick() % 3);
    auto make = [&](const char* addr) {
        lln::NodeConfig c;
        c.addr = Address::from_string(addr);
        c.link = lln::LinkModel::defaults(Rdc::NullRdc, hops);
        for (int i = 0; i < 4; ++i) c.resources.push_back({fmt::format("p/{}", i), to_bytes("0"), true});
        for (int i = 0; i < 2; ++i) c.resources.push_back({fmt::format("s/{}", i), to_bytes("0"), false});
        return c;
    };
    auto& n1 = sim.add_node(make("aaaa::2"));
    auto& n2 = sim.add_node(make("aaaa::3"));
    std::vector<lln::VirtualClient*> clients{&sim.add_client(client_addr),
                                             &sim.add_client(client2_addr)};

    sim.at(SimTime{0}, [&] {
        n1.boot();
        n2.boot();
    });
    const int ops = 4 + static_cast<int>(pick() % 9);
    SimTime t{1s};
    std::string script;
    for (int i = 0; i < ops; ++i, t += 4s) {
        auto* c = clients[pick() % 2];
        const auto kind = pick() % 5;
        const auto sensor = fmt::format("s/{}", pick() % 2);
        const auto param = fmt::format("p/{}", pick() % 4);
        const auto value = to_bytes(std::to_string(pick() % 1000));
        switch (kind) {
        case 0:
            script += "put ";
            sim.at(t, [=, &n1] { c->put(n1.addr(), param, value); });
            break;
        case 1:
            script += "observe ";
            sim.at(t, [=, &n1] { c->observe(n1.addr(), sensor); });
            break;
        case 2:
            script += "bind ";
            sim.at(t, [=, &n1, &n2] { c->bind(n1.addr(), sensor, {n2.addr(), param, 0, 0}); });
            break;
        case 3: {
            script += "deploy ";
            Bytes image(20 + pick() % 300);
            for (auto& b : image) b = static_cast<std::uint8_t>(pick());
            const auto size = static_cast<std::uint16_t>(16u << (pick() % 4));
            const auto file = fmt::format("m{}.ko", pick() % 3);
            sim.at(t, [=, &n1] { c->deploy(n1.addr(), file, image, size); });
            break;
        }
        default:
            script += "change ";
            sim.at(t, [=, &n1] { n1.set_resource(sensor, value); });
            break;
        }
    }
    sim.run_until(t + 5s);
    const auto before = n1.dynamic_state();
    cov.observers += !before.observers.empty();
    cov.bindings += !before.bindings.empty();
    cov.modules += !before.loaded_modules.empty();
    const auto flash_before = n1.flash();
    sim.at(sim.now() + 1s, [&] { n1.crash(1s); });
    sim.run_until(sim.now() + 60s);
    const auto after = n1.dynamic_state();

    const auto& reports = sim.gateway().engine().reports();
    if (n1.phase() != lln::NodePhase::Up) return "node not up after reboot";
    if (!reports.empty() && !reports.back().complete) return "recovery incomplete [" + script + "]";
    if (n1.flash() != flash_before) return "flash changed across crash";
    if (after != before) {
        return "state differs [" + script + "]\n  before: " + before.describe() +
               "\n  after:  " + after.describe();
    }
    return {};
}

auto criterion4() -> Verdict {
    Verdict v;
    constexpr int runs = 120;
    int failures = 0;
    Coverage cov;
    for (std::uint64_t seed = 1; seed <= runs; ++seed) {
        const auto why = oracle_run(seed, cov);
        if (!why.empty()) {
            ++failures;
            v.fail(fmt::format("seed {}: {}", seed, why));
        }
    }
    if (v.pass) {
        v.detail = fmt::format(
            "{} randomized sequences, 0 failures (with observers {}, bindings {}, modules {})",
            runs, cov.observers, cov.bindings, cov.modules);
    } else {
        v.detail = fmt::format("{} failure(s); first {}", failures, v.detail);
    }
    return v;
}

struct Means {
    double association{0};
    double recovery{0};
};

auto means_by(const harness::SweepResult& r, const std::function<long(const harness::SweepPoint&)>& key)
    -> std::map<std::pair<Rdc, long>, Means> {
    std::map<std::pair<Rdc, long>, std::pair<Means, int>> acc;
    for (const auto& p : r.points) {
        auto& [m, n] = acc[{p.rdc, key(p)}];
        m.association += p.association_ms.value_or(0);
        m.recovery += p.recovery_ms.value_or(0);
        ++n;
    }
    std::map<std::pair<Rdc, long>, Means> out;
    for (const auto& [k, mn] : acc) {
        out[k] = {mn.first.association / mn.second, mn.first.recovery / mn.second};
    }
    return out;
}

auto criterion5() -> Verdict {
    Verdict v;
    harness::SweepSpec spec;
    spec.param = harness::SweepParam::Hops;
    spec.first = 1;
    spec.last = 5;
    spec.rdcs = {Rdc::NullRdc, Rdc::ContikiMac};
    spec.reps = 30;
    spec.seed = 2020;
    spec.jobs = jobs();
    const auto r = harness::run_sweep(spec);
    for (const auto& p : r.points) {
        if (!p.recovery_complete || !p.association_ms || !p.recovery_ms) {
            v.fail(fmt::format("incomplete run hops {} {} rep {}", p.hops, to_string(p.rdc), p.rep));
        }
    }
    const auto m = means_by(r, [](const auto& p) { return static_cast<long>(p.hops); });
    for (auto rdc : spec.rdcs) {
        for (long h = 2; h <= 5; ++h) {
            const auto& a = m.at({rdc, h - 1});
            const auto& b = m.at({rdc, h});
            if (b.association < a.association) {
                v.fail(fmt::format("{} association mean drops at {} hops", to_string(rdc), h));
            }
            if (b.recovery < a.recovery) {
                v.fail(fmt::format("{} recovery mean drops at {} hops", to_string(rdc), h));
            }
        }
    }
    for (long h = 1; h <= 5; ++h) {
        const auto& n = m.at({Rdc::NullRdc, h});
        const auto& c = m.at({Rdc::ContikiMac, h});
        if (!(c.association > n.association) || !(c.recovery > n.recovery)) {
            v.fail(fmt::format("ContikiMAC not slower at {} hops", h));
        }
    }
    const double null3 = m.at({Rdc::NullRdc, 3}).association;
    const double cm3 = m.at({Rdc::ContikiMac, 3}).association;
    if (null3 >= 100.0) v.fail(fmt::format("NullRDC 3-hop mean {:.1f} ms", null3));
    if (cm3 >= 1000.0) v.fail(fmt::format("ContikiMAC 3-hop mean {:.1f} ms", cm3));
    if (v.pass) {
        std::string line;
        for (long h = 1; h <= 5; ++h) {
            line += fmt::format(" h{}={:.0f}/{:.0f}", h, m.at({Rdc::NullRdc, h}).association,
                                m.at({Rdc::ContikiMac, h}).association);
        }
        v.detail = fmt::format("association ms nullrdc/contikimac:{}", line);
    }
    return v;
}

auto criterion6() -> Verdict {
    Verdict v;
    harness::SweepSpec spec;
    spec.param = harness::SweepParam::StateCount;
    spec.first = 1;
    spec.last = 3;
    spec.reps = 30;
    spec.hops = 3;
    spec.seed = 2022;
    spec.jobs = jobs();
    const auto r = harness::run_sweep(spec);
    std::map<unsigned, std::map<std::size_t, double>> by_rep;
    for (const auto& p : r.points) {
        if (!p.recovery_complete || !p.recovery_ms) {
            v.fail(fmt::format("incomplete run states {} rep {}", p.states, p.rep));
            continue;
        }
        by_rep[p.rep][p.states] = *p.recovery_ms;
    }
    int monotone = 0;
    for (const auto& [rep, d] : by_rep) {
        if (d.size() == 3 && d.at(1) <= d.at(2) && d.at(2) <= d.at(3)) ++monotone;
    }
    const auto m = means_by(r, [](const auto& p) { return static_cast<long>(p.states); });
    const double m1 = m.at({Rdc::NullRdc, 1}).recovery;
    const double m2 = m.at({Rdc::NullRdc, 2}).recovery;
    const double m3 = m.at({Rdc::NullRdc, 3}).recovery;
    if (!(m1 <= m2 && m2 <= m3)) v.fail(fmt::format("means {:.1f} {:.1f} {:.1f}", m1, m2, m3));
    if (monotone < 28) v.fail(fmt::format("monotone in only {}/30 paired runs", monotone));
    if (v.pass) {
        v.detail = fmt::format("means {:.1f} <= {:.1f} <= {:.1f} ms, monotone in {}/30 pairs", m1,
                               m2, m3, monotone);
    }
    return v;
}

constexpr std::string_view transparency_scenario = R"(coapsd-scenario 1
name transparency
seed 31
gateway cccc::1 prefix aaaa::/64 deploy blocks
node n1 aaaa::2 hops 3 rdc nullrdc
node n2 aaaa::3 hops 2 rdc contikimac
resource n1 /a/lb 0
resource n1 /gpio/btn 0 sensor
resource n2 /a/m 0
client c1 cccc::3
client c2 cccc::4
end 80000

at 1000  put c1 n1 /a/lb 10
at 2000  get c2 n1 /a/lb
at 3000  observe c1 n1 /gpio/btn as btn
at 4000  observe c2 n1 /gpio/btn as btn2
at 5000  change n1 /gpio/btn 1
at 6000  bind c2 n1 /gpio/btn aaaa::3 /a/m
at 7000  change n1 /gpio/btn 0
at 8000  deploy c1 n2 app.ko hex:000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f202122 block 16
at 20000 put c2 n2 /a/m 7
at 21000 deregister c2 btn2
at 22000 change n1 /gpio/btn 1
at 23000 reset c1 btn
at 24000 change n1 /gpio/btn 0
)";

auto criterion7() -> Verdict {
    Verdict v;
    const auto sc = harness::parse_scenario(transparency_scenario);
    harness::RunOptions on;
    on.measure_overhead = true;
    harness::RunOptions off;
    off.no_intercept = true;
    const auto a = harness::run_scenario(sc, on);
    const auto b = harness::run_scenario(sc, off);
    auto frames = [](const harness::RunResult& r) {
        std::vector<std::pair<bool, Datagram>> out;
        for (const auto& f : r.external) out.emplace_back(f.toward_gateway, f.dg);
        return out;
    };
    const auto fa = frames(a);
    const auto fb = frames(b);
    if (fa.empty()) v.fail("no external frames");
    if (fa != fb) v.fail(fmt::format("external sequences differ ({} vs {} frames)", fa.size(), fb.size()));
    if (b.gateway_stats.overhead_us.size() != 0) v.fail("interception ran while disabled");
    const auto& oh = a.gateway_stats.overhead_us;
    if (oh.empty()) v.fail("no overhead samples");
    const double max_us = oh.empty() ? 0 : *std::max_element(oh.begin(), oh.end());
    double mean_us = 0;
    for (double x : oh) mean_us += x;
    if (!oh.empty()) mean_us /= static_cast<double>(oh.size());
    if (max_us >= 1000.0) v.fail(fmt::format("max overhead {:.1f} us", max_us));
    if (v.pass) {
        v.detail = fmt::format("{} external frames identical; overhead mean {:.1f} us, max {:.1f} us over {} frames",
                               fa.size(), mean_us, max_us, oh.size());
    }
    return v;
}

auto criterion8() -> Verdict {
    Verdict v;
    std::mt19937_64 rng{8};
    for (int i = 0; i < 10000; ++i) {
        const auto m = testsupport::random_message(rng);
        const auto d = coap::decode(coap::encode(m));
        if (!d || *d != m) {
            v.fail(fmt::format("round trip {} differs: {}", i, m.summary()));
            break;
        }
    }
    int decoded = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto bytes = testsupport::random_bytes(rng, 64);
        const auto d = coap::decode(bytes);
        if (d) ++decoded;
    }
    if (v.pass) {
        v.detail = fmt::format("10000 round trips exact; 10000 random inputs handled ({} decodable)",
                               decoded);
    }
    return v;
}

} // namespace

auto main() -> int {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"functional recovery replication", criterion1},
        {"observe lifecycle", criterion2},
        {"retransmission cancellation agreement", criterion3},
        {"oracle equivalence", criterion4},
        {"delay shape over hops", criterion5},
        {"state-count shape", criterion6},
        {"transparency and overhead", criterion7},
        {"codec soundness", criterion8},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.fail(std::string{"exception: "} + e.what());
        }
        failed += !v.pass;
        fmt::print("{} criterion {}: {} -- {}\n", v.pass ? "PASS" : "FAIL", i + 1,
                   criteria[i].first, v.detail);
        std::fflush(stdout);
    }
    return failed;
}
