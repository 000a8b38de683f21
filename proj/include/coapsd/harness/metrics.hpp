#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coapsd::harness {

enum class Metric { AssociationDelay, RecoveryDelay, InterceptionOverhead, StateCount, HopCount };

auto to_string(Metric m) -> std::string_view;
auto unit_of(Metric m) -> std::string_view; // ms (simulated), us (wall clock), count
auto parse_metric(std::string_view text) -> std::optional<Metric>;

struct MetricRecord {
    std::string scenario;
    std::string seed;
    Metric metric{Metric::AssociationDelay};
    double value{0.0};
    unsigned hops{0};
    std::string rdc;
    std::size_t state_count{0};
};

inline constexpr std::string_view metrics_header =
    "scenario,seed,metric,value,unit,hops,rdc,state_count";

auto format_record(const MetricRecord& r) -> std::string;
void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records);

struct Summary {
    double mean{0.0};
    double stddev{0.0}; // sample standard deviation; 0 for fewer than two values
};

auto summarize(const std::vector<double>& values) -> Summary;

} // namespace coapsd::harness
