#pragma once

#include "coapsd/gateway/gateway.hpp"
#include "coapsd/harness/metrics.hpp"
#include "coapsd/harness/scenario.hpp"
#include "coapsd/lln/network.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace coapsd::harness {

class AssertionFailure : public std::runtime_error {
public:
    AssertionFailure(std::string name, const std::string& detail)
        : std::runtime_error("assertion '" + name + "' failed: " + detail), name_{std::move(name)} {}
    auto name() const -> const std::string& { return name_; }

private:
    std::string name_;
};

struct RunOptions {
    bool no_intercept{false};
    bool measure_overhead{false}; // adds wall-clock InterceptionOverhead rows
    bool record_trace{true};
};

struct AssertionResult {
    std::string name;
    int line{0};
    bool passed{false};
    std::string detail;
};

struct BootSample {
    std::string node;
    std::uint64_t epoch{0};
    std::optional<SimDuration> association_delay;
    unsigned retransmissions{0};
    bool stalled{false};
};

struct RecoverySample {
    std::string node;
    recovery::RecoveryReport report;
};

struct RunResult {
    std::vector<AssertionResult> assertions;
    std::vector<MetricRecord> metrics;
    std::vector<std::string> trace;
    std::string sd_snapshots;
    std::vector<BootSample> boots;
    std::vector<RecoverySample> recoveries;
    std::vector<lln::ExternalFrame> external;
    gateway::GatewayStats gateway_stats;
    std::uint64_t events_executed{0};

    auto passed() const -> bool;
    // Throws AssertionFailure for the first failed assertion.
    void require() const;
};

auto run_scenario(const Scenario& scenario, const RunOptions& options = {}) -> RunResult;

// Output directory from COAPSD_OUT_DIR, else the working directory.
auto default_out_dir() -> std::filesystem::path;

// Writes <name>.trace, <name>.sd and <name>.metrics.csv; trace_path overrides the trace file.
void write_artifacts(const Scenario& scenario, const RunResult& result,
                     const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& trace_path = std::nullopt);

} // namespace coapsd::harness
