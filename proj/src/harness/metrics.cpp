#include "coapsd/harness/metrics.hpp"

#include <cmath>
#include <fmt/format.h>
#include <optional>
#include <ostream>

namespace coapsd::harness {

auto to_string(Metric m) -> std::string_view {
    switch (m) {
    case Metric::AssociationDelay: return "AssociationDelay";
    case Metric::RecoveryDelay: return "RecoveryDelay";
    case Metric::InterceptionOverhead: return "InterceptionOverhead";
    case Metric::StateCount: return "StateCount";
    case Metric::HopCount: return "HopCount";
    }
    return "?";
}

auto unit_of(Metric m) -> std::string_view {
    switch (m) {
    case Metric::AssociationDelay:
    case Metric::RecoveryDelay: return "ms";
    case Metric::InterceptionOverhead: return "us";
    case Metric::StateCount:
    case Metric::HopCount: return "count";
    }
    return "?";
}

auto parse_metric(std::string_view text) -> std::optional<Metric> {
    for (auto m : {Metric::AssociationDelay, Metric::RecoveryDelay, Metric::InterceptionOverhead,
                   Metric::StateCount, Metric::HopCount}) {
        if (to_string(m) == text) return m;
    }
    return std::nullopt;
}

auto format_record(const MetricRecord& r) -> std::string {
    return fmt::format("{},{},{},{:.3f},{},{},{},{}", r.scenario, r.seed, to_string(r.metric),
                       r.value, unit_of(r.metric), r.hops, r.rdc, r.state_count);
}

void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records) {
    out << metrics_header << '\n';
    for (const auto& r : records) out << format_record(r) << '\n';
}

auto summarize(const std::vector<double>& values) -> Summary {
    Summary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return s;
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    return s;
}

} // namespace coapsd::harness
