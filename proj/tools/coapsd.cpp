// coapsd: run crash-recovery scenarios and delay sweeps on the simulated LLN.

#include "coapsd/harness/runner.hpp"
#include "coapsd/harness/sweep.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>

namespace {

using namespace coapsd;
using namespace coapsd::harness;

constexpr int exit_assertion = 1;
constexpr int exit_error = 2;

auto parse_range(const std::string& text) -> std::pair<long, long> {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        const long v = std::stol(text);
        return {v, v};
    }
    return {std::stol(text.substr(0, dots)), std::stol(text.substr(dots + 2))};
}

auto parse_rdcs(const std::string& text) -> std::vector<lln::Rdc> {
    std::vector<lln::Rdc> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos
                                                                        : comma - start);
        if (item == "both" || item == "all") {
            out.push_back(lln::Rdc::NullRdc);
            out.push_back(lln::Rdc::ContikiMac);
        } else {
            auto r = lln::parse_rdc(item);
            if (!r) throw std::invalid_argument("unknown rdc '" + item + "'");
            out.push_back(*r);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

auto cmd_run(const std::string& path, const std::optional<std::string>& trace, bool no_intercept,
             bool measure_overhead, const std::optional<std::string>& out_dir) -> int {
    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const ParseError& e) {
        std::cerr << fmt::format("ParseError: {}: {}\n", path, e.what());
        return exit_error;
    }
    RunOptions opts;
    opts.no_intercept = no_intercept;
    opts.measure_overhead = measure_overhead;
    const auto result = run_scenario(sc, opts);
    const auto dir = out_dir ? std::filesystem::path{*out_dir} : default_out_dir();
    write_artifacts(sc, result, dir,
                    trace ? std::optional<std::filesystem::path>{*trace} : std::nullopt);

    for (const auto& a : result.assertions) {
        std::cout << fmt::format("{} {} (line {}){}{}\n", a.passed ? "PASS" : "FAIL", a.name,
                                 a.line, a.passed ? "" : ": ", a.detail);
    }
    try {
        result.require();
    } catch (const AssertionFailure& e) {
        std::cerr << "AssertionFailure: " << e.what() << '\n';
        return exit_assertion;
    }
    std::cout << fmt::format("{}: {} assertion(s) passed, {} metric row(s), artifacts in {}\n",
                             sc.name, result.assertions.size(), result.metrics.size(),
                             dir.string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crash-recovery gateway simulator for CoAP networks"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one scenario file");
    std::string scenario_path;
    std::optional<std::string> trace_path;
    std::optional<std::string> run_out;
    bool no_intercept = false;
    bool measure_overhead = false;
    run->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--trace", trace_path, "Write the event trace to this file");
    run->add_option("--out-dir", run_out, "Artifact directory (default: $COAPSD_OUT_DIR or .)");
    run->add_flag("--no-intercept", no_intercept, "Disable the interception hook");
    run->add_flag("--measure-overhead", measure_overhead,
                  "Report wall-clock interception overhead in the metrics");

    auto* sweep = app.add_subcommand("sweep", "Sweep the canonical crash-recovery scenario");
    std::string param = "hops";
    std::string range = "1..5";
    std::string rdc = "nullrdc";
    std::string metric;
    std::optional<std::string> out;
    SweepSpec spec;
    sweep->add_option("--param", param, "hops | state_count | rdc")->capture_default_str();
    sweep->add_option("--range", range, "Inclusive integer range a..b")->capture_default_str();
    sweep->add_option("--reps", spec.reps, "Repetitions per value")->capture_default_str();
    sweep->add_option("--seed", spec.seed, "Base seed")->capture_default_str();
    sweep->add_option("--out", out, "CSV output path (default: stdout)");
    sweep->add_option("--rdc", rdc, "nullrdc, contikimac, or a comma list")->capture_default_str();
    sweep->add_option("--hops", spec.hops, "Hop count when not swept")->capture_default_str();
    sweep->add_option("--states", spec.states, "State count when not swept")->capture_default_str();
    sweep->add_option("--jobs", spec.jobs, "Parallel workers")->capture_default_str();
    sweep->add_option("--metric", metric, "Only emit rows for this metric");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(scenario_path, trace_path, no_intercept, measure_overhead, run_out);
        }

        auto p = parse_sweep_param(param);
        if (!p) throw std::invalid_argument("unknown sweep parameter '" + param + "'");
        spec.param = *p;
        spec.rdcs = *p == SweepParam::Rdc ? parse_rdcs("both") : parse_rdcs(rdc);
        if (*p != SweepParam::Rdc) std::tie(spec.first, spec.last) = parse_range(range);
        if (!metric.empty()) {
            spec.only = parse_metric(metric);
            if (!spec.only) throw std::invalid_argument("unknown metric '" + metric + "'");
        }
        const auto result = run_sweep(spec);
        for (const auto& pt : result.points) {
            if (pt.recovery_ms && !pt.recovery_complete) {
                std::cerr << fmt::format("warning: incomplete recovery (hops={} rdc={} seed={})\n",
                                         pt.hops, lln::to_string(pt.rdc), pt.seed);
            }
        }
        if (out) {
            std::filesystem::path path{*out};
            if (path.is_relative() && std::getenv("COAPSD_OUT_DIR")) path = default_out_dir() / path;
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            std::ofstream f{path};
            write_metrics(f, result.records);
            std::cout << fmt::format("{} row(s) written to {}\n", result.records.size(), path.string());
        } else {
            write_metrics(std::cout, result.records);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_error;
    }
}
