#include "coapsd/harness/runner.hpp"

#include "coapsd/harness/simulation.hpp"

#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace coapsd::harness {

auto RunResult::passed() const -> bool {
    for (const auto& a : assertions) {
        if (!a.passed) return false;
    }
    return true;
}

void RunResult::require() const {
    for (const auto& a : assertions) {
        if (!a.passed) throw AssertionFailure(a.name, a.detail);
    }
}

auto default_out_dir() -> std::filesystem::path {
    if (const char* dir = std::getenv("COAPSD_OUT_DIR"); dir && *dir) return dir;
    return std::filesystem::current_path();
}

namespace {

auto to_u32(const std::string& s) -> std::uint32_t {
    std::uint32_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

auto join(const std::vector<std::uint32_t>& v) -> std::string {
    return fmt::format("[{}]", fmt::join(v, " "));
}

struct ObservationRef {
    std::string client;
    Address client_addr;
    coap::Token token;
};

class Run {
public:
    Run(const Scenario& sc, const RunOptions& opts) : sc_{sc}, opts_{opts}, sim_{make_config()} {}

    auto execute() -> RunResult {
        for (const auto& decl : sc_.nodes) {
            lln::NodeConfig nc;
            nc.addr = decl.addr;
            nc.link = decl.link;
            nc.resources = decl.resources;
            nc.flash = decl.flash;
            nc.policy = decl.policy;
            auto& node = sim_.add_node(std::move(nc));
            nodes_[decl.name] = &node;
            sim_.at(decl.boot_at, [&node] { node.boot(); });
        }
        for (const auto& decl : sc_.clients) clients_[decl.name] = &sim_.add_client(decl.addr);
        for (const auto& ev : sc_.events) {
            sim_.at(ev.at, [this, &ev] { apply(ev); });
        }
        sim_.run_until(sc_.end);
        return collect();
    }

private:
    auto make_config() const -> SimulationConfig {
        SimulationConfig c;
        c.seed = sc_.seed;
        c.gateway = sc_.gateway;
        if (opts_.no_intercept) c.gateway.interception_enabled = false;
        c.record_trace = opts_.record_trace;
        return c;
    }

    auto node_addr(const std::string& name) const -> const Address& {
        return nodes_.at(name)->addr();
    }

    void apply(const Event& ev) {
        switch (ev.kind) {
        case EventKind::Put:
            clients_.at(ev.client)->put(node_addr(ev.node), ev.path, ev.value, ev.content_format);
            break;
        case EventKind::Get:
            clients_.at(ev.client)->get(node_addr(ev.node), ev.path);
            break;
        case EventKind::Observe: {
            auto* c = clients_.at(ev.client);
            auto token = c->observe(node_addr(ev.node), ev.path, ev.token);
            observations_[ev.label] = {ev.client, c->addr(), token};
            break;
        }
        case EventKind::Deregister:
            clients_.at(ev.client)->deregister(observations_.at(ev.label).token);
            break;
        case EventKind::Reset:
            clients_.at(ev.client)->reset_on_next(observations_.at(ev.label).token);
            break;
        case EventKind::Bind:
            clients_.at(ev.client)->bind(node_addr(ev.node), ev.path, ev.binding);
            break;
        case EventKind::Deploy:
            clients_.at(ev.client)->deploy(node_addr(ev.node), ev.label, ev.value, ev.block_size,
                                           sc_.gateway.loader_path);
            break;
        case EventKind::Change:
            nodes_.at(ev.node)->set_resource(ev.path, ev.value, ev.observe);
            break;
        case EventKind::Notify:
            nodes_.at(ev.node)->notify_observers(ev.path, ev.observe);
            break;
        case EventKind::Crash:
            nodes_.at(ev.node)->crash(ev.duration);
            break;
        case EventKind::Silence:
            clients_.at(ev.client)->set_silent(ev.flag);
            break;
        case EventKind::Capture:
            captures_[ev.label] = nodes_.at(ev.node)->dynamic_state();
            break;
        case EventKind::Expect: {
            AssertionResult r;
            r.name = ev.name;
            r.line = ev.line;
            const auto error = check(ev);
            r.passed = !error;
            r.detail = error.value_or("");
            std::ostringstream snap;
            sim_.gateway().directory().write_snapshot(snap);
            snapshots_ += fmt::format("# t={:.3f} {} {}\n{}", to_ms(sim_.now()), ev.name,
                                      r.passed ? "PASS" : "FAIL", snap.str());
            assertions_.push_back(std::move(r));
            break;
        }
        }
    }

    auto check(const Event& ev) -> std::optional<std::string> {
        const auto& a = ev.args;
        const auto& k = ev.expect;
        if (k == "deployed") {
            const auto& done = clients_.at(a[0])->deploys_completed();
            if (std::find(done.begin(), done.end(), a[1]) == done.end()) {
                return "client has not completed deploy of " + a[1];
            }
            return std::nullopt;
        }
        if (k == "client-observes") {
            const auto& obs = observations_.at(a[1]);
            std::vector<std::uint32_t> seen;
            for (const auto& n : clients_.at(a[0])->notifications()) {
                if (n.token == obs.token && n.fresh) seen.push_back(n.observe);
            }
            return compare_sequence(seen, a, 2);
        }

        auto* node = nodes_.at(a[0]);
        auto& dir = sim_.gateway().directory();
        if (k == "sd-types") {
            std::vector<std::uint32_t> types;
            for (const auto& e : dir.entries_for_server(node->addr())) {
                types.push_back(static_cast<std::uint32_t>(e.type));
            }
            return compare_sequence(types, a, 1);
        }
        if (k == "sd-count") {
            const auto n = dir.entries_for_server(node->addr()).size();
            if (n != to_u32(a[1])) return fmt::format("expected {} entries, found {}", a[1], n);
            return std::nullopt;
        }
        if (k == "sd-observe") {
            const auto path = coap::normalize_path(a[1]);
            const auto& client = clients_.at(a[2])->addr();
            for (const auto& e : dir.entries_for_server(node->addr())) {
                if (e.type != sd::EntryType::Observe || e.uri_path != path || e.client.addr != client) {
                    continue;
                }
                if (e.observe_counter != to_u32(a[3]) || e.retransmit_counter != to_u32(a[4])) {
                    return fmt::format("entry has obs={} ret={}", e.observe_counter,
                                       e.retransmit_counter);
                }
                return std::nullopt;
            }
            return "no OBSERVE entry for /" + path;
        }
        if (k == "resource") {
            const auto v = node->resource(a[1]);
            if (!v) return "no resource " + a[1];
            const auto want = parse_value(a[2]);
            if (*v != want) return fmt::format("value is '{}', expected '{}'", to_text(*v), a[2]);
            return std::nullopt;
        }
        if (k == "observer" || k == "no-observer") {
            const auto path = coap::normalize_path(a[1]);
            std::vector<std::string> found;
            for (const auto& o : node->observers()) {
                if (o.path == path) found.push_back(o.client.addr.to_string());
            }
            if (k == "no-observer") {
                if (found.empty()) return std::nullopt;
                return fmt::format("observers present: {}", fmt::join(found, ", "));
            }
            const auto want = clients_.at(a[2])->addr().to_string();
            if (std::find(found.begin(), found.end(), want) != found.end()) return std::nullopt;
            return fmt::format("no observer from {} (found: {})", want, fmt::join(found, ", "));
        }
        if (k == "node-notifications") {
            const auto& obs = observations_.at(a[1]);
            std::vector<std::uint32_t> seq;
            for (const auto& n : node->notifications()) {
                if (n.epoch == node->boot_epoch() && n.token == obs.token &&
                    n.client.addr == obs.client_addr) {
                    seq.push_back(n.observe);
                }
            }
            return compare_sequence(seq, a, 2);
        }
        if (k == "mid-reinit") {
            const auto epoch = node->boot_epoch();
            if (epoch < 2) return std::string{"node has not rebooted"};
            std::optional<coap::MessageId> prev_last;
            std::optional<coap::MessageId> cur_first;
            for (const auto& n : node->notifications()) {
                if (n.is_registration_response) continue;
                if (n.epoch == epoch - 1) prev_last = n.mid;
                if (n.epoch == epoch && !cur_first) cur_first = n.mid;
            }
            if (!prev_last || !cur_first) return std::string{"missing notifications around reboot"};
            if (*cur_first == static_cast<coap::MessageId>(*prev_last + 1)) {
                return fmt::format("MID {} continues previous epoch", *cur_first);
            }
            return std::nullopt;
        }
        if (k == "phase") {
            if (lln::to_string(node->phase()) != a[1]) {
                return fmt::format("phase is {}", lln::to_string(node->phase()));
            }
            return std::nullopt;
        }
        if (k == "recovery") {
            const recovery::RecoveryReport* last = nullptr;
            for (const auto& r : sim_.gateway().engine().reports()) {
                if (r.node == node->addr()) last = &r;
            }
            if (a[1] == "none") {
                return last ? std::optional<std::string>{"a recovery ran"} : std::nullopt;
            }
            if (!last) return std::string{"no recovery report"};
            const bool want = a[1] == "complete";
            if (last->complete != want) return fmt::format("recovery complete={}", last->complete);
            return std::nullopt;
        }
        if (k == "state-equals") {
            const auto now = node->dynamic_state();
            const auto& then = captures_.at(a[1]);
            if (now == then) return std::nullopt;
            return fmt::format("state differs\n--- captured\n{}--- now\n{}", then.describe(),
                               now.describe());
        }
        if (k == "loaded") {
            std::set<std::string> want(a.begin() + 1, a.end());
            if (node->loaded_modules() == want) return std::nullopt;
            return fmt::format("loaded modules are [{}]", fmt::join(node->loaded_modules(), " "));
        }
        if (k == "binding") {
            const auto path = coap::normalize_path(a[1]);
            const auto dest = Address::from_string(a[2]);
            const auto res = coap::normalize_path(a[3]);
            for (const auto& b : node->bindings()) {
                if (b.source_resource == path && b.binding.dest_addr == dest &&
                    b.binding.dest_resource == res) {
                    return std::nullopt;
                }
            }
            return "no such binding";
        }
        return "unsupported expectation " + k;
    }

    static auto compare_sequence(const std::vector<std::uint32_t>& got,
                                 const std::vector<std::string>& args, std::size_t from)
        -> std::optional<std::string> {
        std::vector<std::uint32_t> want;
        for (std::size_t i = from; i < args.size(); ++i) want.push_back(to_u32(args[i]));
        if (got == want) return std::nullopt;
        return fmt::format("got {}, expected {}", join(got), join(want));
    }

    auto collect() -> RunResult {
        RunResult out;
        out.assertions = std::move(assertions_);
        out.sd_snapshots = std::move(snapshots_);
        out.external = sim_.network().external_frames();
        out.gateway_stats = sim_.gateway().stats();
        out.events_executed = sim_.loop().executed();
        out.trace = sim_.trace();

        const auto seed = std::to_string(sc_.seed);
        auto& dir = sim_.gateway().directory();
        const auto& reports = sim_.gateway().engine().reports();
        for (const auto& decl : sc_.nodes) {
            const auto* node = nodes_.at(decl.name);
            const auto states = dir.entries_for_server(node->addr()).size();
            const auto hops = decl.link.hops;
            const std::string rdc{lln::to_string(decl.link.rdc)};
            auto row = [&](Metric m, double v, std::size_t state_count) {
                out.metrics.push_back({sc_.name, seed, m, v, hops, rdc, state_count});
            };
            row(Metric::HopCount, hops, states);
            for (const auto& b : node->boots()) {
                out.boots.push_back({decl.name, b.epoch, b.association_delay(), b.retransmissions,
                                     b.stalled});
                if (auto d = b.association_delay()) row(Metric::AssociationDelay, to_ms(*d), states);
            }
            for (const auto& r : reports) {
                if (r.node != node->addr()) continue;
                out.recoveries.push_back({decl.name, r});
                row(Metric::RecoveryDelay, to_ms(r.recovery_delay), r.steps.size());
                row(Metric::StateCount, static_cast<double>(r.steps.size()), r.steps.size());
            }
        }
        if (opts_.measure_overhead && !out.gateway_stats.overhead_us.empty()) {
            const auto s = summarize(out.gateway_stats.overhead_us);
            out.metrics.push_back({sc_.name, seed, Metric::InterceptionOverhead, s.mean, 0, "-", 0});
        }
        return out;
    }

    const Scenario& sc_;
    const RunOptions& opts_;
    Simulation sim_;
    std::map<std::string, lln::VirtualNode*> nodes_;
    std::map<std::string, lln::VirtualClient*> clients_;
    std::map<std::string, ObservationRef> observations_;
    std::map<std::string, lln::DynamicState> captures_;
    std::vector<AssertionResult> assertions_;
    std::string snapshots_;
};

} // namespace

auto run_scenario(const Scenario& scenario, const RunOptions& options) -> RunResult {
    return Run{scenario, options}.execute();
}

void write_artifacts(const Scenario& scenario, const RunResult& result,
                     const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& trace_path) {
    std::filesystem::create_directories(out_dir);
    const auto base = out_dir / scenario.name;
    {
        std::ofstream t{trace_path ? *trace_path : std::filesystem::path{base.string() + ".trace"}};
        for (const auto& line : result.trace) t << line << '\n';
    }
    {
        std::ofstream s{base.string() + ".sd"};
        s << result.sd_snapshots;
    }
    std::ofstream m{base.string() + ".metrics.csv"};
    write_metrics(m, result.metrics);
}

} // namespace coapsd::harness
