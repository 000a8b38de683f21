#include "coapsd/harness/sweep.hpp"

#include "coapsd/harness/runner.hpp"

#include <atomic>
#include <fmt/format.h>
#include <map>
#include <stdexcept>
#include <thread>

namespace coapsd::harness {

auto to_string(SweepParam p) -> std::string_view {
    switch (p) {
    case SweepParam::Hops: return "hops";
    case SweepParam::StateCount: return "state_count";
    case SweepParam::Rdc: return "rdc";
    }
    return "?";
}

auto parse_sweep_param(std::string_view text) -> std::optional<SweepParam> {
    if (text == "hops") return SweepParam::Hops;
    if (text == "state_count" || text == "states") return SweepParam::StateCount;
    if (text == "rdc") return SweepParam::Rdc;
    return std::nullopt;
}

auto derive_seed(std::uint64_t base, unsigned rep) -> std::uint64_t {
    // splitmix64 finalizer
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(rep) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

auto canonical_scenario(const CanonicalParams& p) -> Scenario {
    using std::chrono::milliseconds;
    Scenario sc;
    sc.name = "canonical";
    sc.seed = p.seed;

    NodeDecl node;
    node.name = "n1";
    node.addr = Address::from_string("aaaa::2");
    node.link = lln::LinkModel::defaults(p.rdc, p.hops, 0.0);
    for (std::size_t i = 0; i < p.states; ++i) {
        node.resources.push_back({fmt::format("p{}", i), to_bytes("0"), true});
    }
    node.resources.push_back({"gpio/btn", to_bytes("0"), false});
    sc.nodes.push_back(std::move(node));
    sc.clients.push_back({"c1", Address::from_string("cccc::3")});

    SimTime t = milliseconds{10'000};
    for (std::size_t i = 0; i < p.states; ++i) {
        Event ev;
        ev.kind = EventKind::Put;
        ev.at = t;
        ev.client = "c1";
        ev.node = "n1";
        ev.path = fmt::format("p{}", i);
        ev.value = to_bytes(fmt::format("v{}", i));
        ev.content_format = 0;
        sc.events.push_back(std::move(ev));
        t += milliseconds{1'000};
    }
    Event crash;
    crash.kind = EventKind::Crash;
    crash.at = t + milliseconds{5'000};
    crash.node = "n1";
    crash.duration = milliseconds{1'000};
    sc.events.push_back(crash);
    sc.end = crash.at + crash.duration + milliseconds{120'000};
    return sc;
}

void SweepSpec::validate() const {
    if (reps < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (rdcs.empty()) throw std::invalid_argument("at least one RDC model is required");
    if (param != SweepParam::Rdc) {
        if (first > last) throw std::invalid_argument("empty range");
        if (param == SweepParam::Hops && first < 1) throw std::invalid_argument("hops start at 1");
        if (param == SweepParam::StateCount && first < 0) {
            throw std::invalid_argument("state_count must be nonnegative");
        }
    }
    if (hops < 1) throw std::invalid_argument("hops start at 1");
}

namespace {

auto run_point(SweepPoint point) -> SweepPoint {
    const auto sc = canonical_scenario({point.hops, point.rdc, point.states, point.seed});
    RunOptions opts;
    opts.record_trace = false;
    const auto result = run_scenario(sc, opts);
    for (const auto& b : result.boots) {
        if (b.epoch == 2 && b.association_delay) point.association_ms = to_ms(*b.association_delay);
    }
    if (!result.recoveries.empty()) {
        const auto& r = result.recoveries.back().report;
        point.recovery_ms = to_ms(r.recovery_delay);
        point.recovery_complete = r.complete;
    }
    return point;
}

} // namespace

auto run_sweep(const SweepSpec& spec) -> SweepResult {
    spec.validate();
    SweepResult out;

    // Parameter grid: (hops, rdc, states) per value, repetitions innermost.
    std::vector<SweepPoint> grid;
    auto add_value = [&](unsigned hops, lln::Rdc rdc, std::size_t states) {
        for (unsigned rep = 0; rep < spec.reps; ++rep) {
            grid.push_back({hops, rdc, states, rep, derive_seed(spec.seed, rep), {}, {}, false});
        }
    };
    for (auto rdc : spec.rdcs) {
        switch (spec.param) {
        case SweepParam::Hops:
            for (long h = spec.first; h <= spec.last; ++h) {
                add_value(static_cast<unsigned>(h), rdc, spec.states);
            }
            break;
        case SweepParam::StateCount:
            for (long s = spec.first; s <= spec.last; ++s) {
                add_value(spec.hops, rdc, static_cast<std::size_t>(s));
            }
            break;
        case SweepParam::Rdc:
            add_value(spec.hops, rdc, spec.states);
            break;
        }
    }

    out.points.resize(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) out.points[i] = run_point(grid[i]);
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(spec.jobs, static_cast<unsigned>(grid.size())));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    auto wanted = [&](Metric m) { return !spec.only || *spec.only == m; };
    std::map<std::tuple<unsigned, int, std::size_t, int>, std::vector<double>> groups;
    std::vector<std::tuple<unsigned, int, std::size_t, int>> order;
    for (const auto& p : out.points) {
        const std::string rdc{lln::to_string(p.rdc)};
        auto emit = [&](Metric m, const std::optional<double>& v) {
            if (!v || !wanted(m)) return;
            out.records.push_back({"canonical", std::to_string(p.seed), m, *v, p.hops, rdc, p.states});
            const auto key = std::tuple{p.hops, static_cast<int>(p.rdc), p.states, static_cast<int>(m)};
            if (!groups.contains(key)) order.push_back(key);
            groups[key].push_back(*v);
        };
        emit(Metric::AssociationDelay, p.association_ms);
        emit(Metric::RecoveryDelay, p.recovery_ms);
    }
    if (spec.reps >= 2) {
        for (const auto& key : order) {
            const auto& [hops, rdc, states, metric] = key;
            const auto s = summarize(groups.at(key));
            const std::string rdc_name{lln::to_string(static_cast<lln::Rdc>(rdc))};
            const auto m = static_cast<Metric>(metric);
            const auto seed = std::to_string(spec.seed);
            out.records.push_back({"mean", seed, m, s.mean, hops, rdc_name, states});
            out.records.push_back({"stddev", seed, m, s.stddev, hops, rdc_name, states});
        }
    }
    return out;
}

} // namespace coapsd::harness
