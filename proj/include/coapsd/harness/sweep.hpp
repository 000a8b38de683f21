#pragma once

#include "coapsd/harness/metrics.hpp"
#include "coapsd/harness/scenario.hpp"
#include "coapsd/lln/link_model.hpp"

#include <optional>
#include <vector>

namespace coapsd::harness {

enum class SweepParam { Hops, StateCount, Rdc };

auto to_string(SweepParam p) -> std::string_view;
auto parse_sweep_param(std::string_view text) -> std::optional<SweepParam>;

struct CanonicalParams {
    unsigned hops{3};
    lln::Rdc rdc{lln::Rdc::NullRdc};
    std::size_t states{3};
    std::uint64_t seed{1};
};

// One node, one client, `states` PUTs on distinct parameters, a crash, and recovery.
auto canonical_scenario(const CanonicalParams& p) -> Scenario;

// Seed for repetition rep; equal across parameter values so runs pair up.
auto derive_seed(std::uint64_t base, unsigned rep) -> std::uint64_t;

struct SweepSpec {
    SweepParam param{SweepParam::Hops};
    long first{1};
    long last{1};
    std::vector<lln::Rdc> rdcs{lln::Rdc::NullRdc};
    unsigned hops{3};
    std::size_t states{3};
    unsigned reps{1};
    std::uint64_t seed{1};
    unsigned jobs{1};
    std::optional<Metric> only; // restrict rows to one metric

    void validate() const; // throws std::invalid_argument
};

struct SweepPoint {
    unsigned hops{0};
    lln::Rdc rdc{lln::Rdc::NullRdc};
    std::size_t states{0};
    unsigned rep{0};
    std::uint64_t seed{0};
    std::optional<double> association_ms; // boot after the crash
    std::optional<double> recovery_ms;
    bool recovery_complete{false};
};

struct SweepResult {
    std::vector<SweepPoint> points; // grouped by parameter value, then repetition
    std::vector<MetricRecord> records;
};

auto run_sweep(const SweepSpec& spec) -> SweepResult;

} // namespace coapsd::harness
