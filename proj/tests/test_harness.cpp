#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coapsd/harness/runner.hpp"
#include "coapsd/harness/scenario.hpp"
#include "coapsd/harness/sweep.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coapsd;
using namespace coapsd::harness;

namespace {

auto scenario_path(std::string_view name) -> std::string {
    return std::string{COAPSD_SCENARIO_DIR} + "/" + std::string{name} + ".scn";
}

auto parse_error_line(std::string_view text) -> int {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

auto slurp(const std::filesystem::path& p) -> std::string {
    std::ifstream in{p, std::ios::binary};
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

constexpr std::string_view header = "coapsd-scenario 1\n";

} // namespace

TEST_CASE("parse errors carry the offending line") {
    CHECK(parse_error_line("bogus 1\n") == 1);
    CHECK(parse_error_line(std::string{header} + "name x\nfrobnicate\n") == 3);
    CHECK(parse_error_line(std::string{header} + "node n1 cccc::9\n") == 2);
    CHECK(parse_error_line(std::string{header} + "client c1 cccc::3\nat 10 put c1 n9 /a 1\n") == 3);
    CHECK(parse_error_line(std::string{header} +
                           "node n1 aaaa::2\nresource n1 /a 0\nclient c1 cccc::3\n"
                           "at 20 put c1 n1 /a 1\nat 10 put c1 n1 /a 2\n") == 6);
    CHECK(parse_error_line(std::string{header} + "node n1 aaaa::2\nat 5 crash n1\n") == 3);
    CHECK(parse_error_line(std::string{header} + "node n1 aaaa::2 hops 0\n") == 2);
    CHECK(parse_error_line(std::string{header} + "node n1 aaaa::2\nat -5 crash n1 10\n") == 3);
    CHECK(parse_error_line(std::string{header} + "node n1 aaaa::2\nend 10\nat 20 crash n1 10\n") ==
          4);
}

TEST_CASE("bundled scenario parses") {
    const auto sc = load_scenario(scenario_path("fig12_19"));
    CHECK(sc.name == "fig12_19");
    CHECK(sc.seed == 7);
    REQUIRE(sc.nodes.size() == 1);
    CHECK(sc.nodes[0].resources.size() == 3);
    CHECK(sc.events.size() == 20);
}

TEST_CASE("empty scenario passes with no metrics") {
    const auto r = run_scenario(load_scenario(scenario_path("empty")));
    CHECK(r.passed());
    CHECK(r.assertions.empty());
    CHECK(r.metrics.empty());
    CHECK_NOTHROW(r.require());
}

TEST_CASE("a wrong expectation fails by name") {
    const auto r = run_scenario(load_scenario(scenario_path("wrong_value")));
    CHECK_FALSE(r.passed());
    try {
        r.require();
        FAIL("require() did not throw");
    } catch (const AssertionFailure& e) {
        CHECK(e.name() == "lb-wrong-after-recovery");
    }
}

TEST_CASE("bundled scenario passes and its artifacts are reproducible") {
    const auto sc = load_scenario(scenario_path("fig12_19"));
    const auto dir = std::filesystem::temp_directory_path() / "coapsd_harness_test";
    std::filesystem::remove_all(dir);
    std::string first_csv;
    std::string first_trace;
    for (int round = 0; round < 2; ++round) {
        const auto r = run_scenario(sc);
        CHECK(r.passed());
        write_artifacts(sc, r, dir);
        const auto csv = slurp(dir / "fig12_19.metrics.csv");
        const auto trace = slurp(dir / "fig12_19.trace");
        CHECK(csv.rfind(std::string{metrics_header} + "\n", 0) == 0);
        CHECK(std::filesystem::exists(dir / "fig12_19.sd"));
        if (round == 0) {
            first_csv = csv;
            first_trace = trace;
        } else {
            CHECK(csv == first_csv);
            CHECK(trace == first_trace);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("metric formatting and summaries") {
    CHECK(format_record({"s", "7", Metric::RecoveryDelay, 155.9284, 1, "nullrdc", 3}) ==
          "s,7,RecoveryDelay,155.928,ms,1,nullrdc,3");
    CHECK(unit_of(Metric::InterceptionOverhead) == "us");
    CHECK(unit_of(Metric::StateCount) == "count");
    CHECK(parse_metric("HopCount") == Metric::HopCount);
    const auto s = summarize({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(s.mean == doctest::Approx(5.0));
    CHECK(s.stddev == doctest::Approx(2.13809).epsilon(1e-4));
    CHECK(summarize({3.0}).stddev == 0.0);
}

TEST_CASE("sweep over a single value with one repetition gives one row") {
    SweepSpec spec;
    spec.param = SweepParam::Hops;
    spec.first = spec.last = 2;
    spec.reps = 1;
    spec.only = Metric::AssociationDelay;
    const auto r = run_sweep(spec);
    REQUIRE(r.points.size() == 1);
    CHECK(r.points[0].recovery_complete);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].metric == Metric::AssociationDelay);
    CHECK(r.records[0].hops == 2);
}

TEST_CASE("sweep adds summary rows and is independent of the worker count") {
    SweepSpec spec;
    spec.param = SweepParam::StateCount;
    spec.first = 1;
    spec.last = 3;
    spec.reps = 3;
    spec.seed = 99;
    spec.jobs = 1;
    const auto serial = run_sweep(spec);
    spec.jobs = 4;
    const auto parallel = run_sweep(spec);
    std::ostringstream a;
    std::ostringstream b;
    write_metrics(a, serial.records);
    write_metrics(b, parallel.records);
    CHECK(a.str() == b.str());
    CHECK(serial.points.size() == 9);
    // 3 values x 3 reps x 2 metrics, plus mean and stddev per value and metric.
    CHECK(serial.records.size() == 18 + 12);
    CHECK(a.str().find("\nstddev,99,") != std::string::npos);
    std::size_t means = 0;
    for (const auto& r : serial.records) means += r.scenario == "mean";
    CHECK(means == 6);
    CHECK(derive_seed(99, 0) == derive_seed(99, 0));
    CHECK(derive_seed(99, 0) != derive_seed(99, 1));
}

TEST_CASE("invalid sweep specifications are rejected") {
    SweepSpec spec;
    spec.first = 3;
    spec.last = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.first = 1;
    spec.reps = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("canonical scenario shape") {
    const auto sc = canonical_scenario({4, lln::Rdc::ContikiMac, 2, 5});
    REQUIRE(sc.nodes.size() == 1);
    CHECK(sc.nodes[0].link.hops == 4);
    CHECK(sc.nodes[0].link.rdc == lln::Rdc::ContikiMac);
    std::size_t puts = 0;
    for (const auto& e : sc.events) puts += e.kind == EventKind::Put;
    CHECK(puts == 2);
}
