#pragma once

#include "coapsd/coap/message.hpp"
#include "coapsd/coap/transmission.hpp"
#include "coapsd/core/sim_time.hpp"
#include "coapsd/sd/state_directory.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace coapsd::recovery {

struct ReplayStep {
    coap::Message message;
    Endpoint spoofed_source; // stored client for PUT/OBSERVE, gateway for BIND/DEPLOY
    Endpoint destination;
    bool suppress_response{true};
    sd::EntryType origin{sd::EntryType::Put};
    sd::EntryId entry{0};
};

struct RecoveryPlan {
    Address node;
    std::vector<ReplayStep> steps;
    SimDuration pacing_gap{std::chrono::milliseconds{50}};
};

// Fresh identifiers for replayed messages.
struct IdSource {
    std::function<coap::MessageId()> next_mid;
    std::function<coap::Token()> next_token;
};

// Turns directory entries for one node into replay steps. PUT and DEPLOY entries are
// replayed before OBSERVE and BIND entries; within each group, creation order holds.
auto build_plan(std::span<const sd::SdEntry> entries, const Endpoint& gateway, IdSource& ids,
                SimDuration pacing_gap = std::chrono::milliseconds{50}) -> RecoveryPlan;

// Replay steps are handed to the gateway, which calls back with the node's response.
using ResponseHandler = std::function<void(const coap::Message&)>;

class Injector {
public:
    virtual ~Injector() = default;
    virtual void inject(const ReplayStep& step, ResponseHandler on_response) = 0;
};

using ReliabilityParams = coap::TransmissionParams;

enum class StepStatus { Pending, Acked, Rejected, TimedOut, Aborted };

auto to_string(StepStatus s) -> std::string_view;

struct StepOutcome {
    std::size_t index{0};
    sd::EntryType origin{sd::EntryType::Put};
    StepStatus status{StepStatus::Pending};
    unsigned retransmissions{0};
    SimTime injected_at{};
    SimTime finished_at{};
    std::optional<coap::Code> response_code;
};

struct RecoveryReport {
    Address node;
    std::vector<StepOutcome> steps;
    SimTime started_at{};
    SimTime finished_at{};
    SimDuration recovery_delay{};
    bool complete{true}; // every step acknowledged
    bool aborted{false};
};

// Runs one plan: stop-and-wait, one confirmable step at a time, pacing_gap between a
// step's completion and the next injection.
class PlanExecution : public std::enable_shared_from_this<PlanExecution> {
public:
    using DoneHandler = std::function<void(const RecoveryReport&)>;

    PlanExecution(RecoveryPlan plan, Scheduler& scheduler, Injector& injector,
                  ReliabilityParams params, std::function<double()> uniform01,
                  DoneHandler on_done);

    // started_at anchors recovery_delay; defaults to now.
    void start(std::optional<SimTime> started_at = std::nullopt);
    void abort();

    auto finished() const -> bool { return finished_; }
    auto report() const -> const RecoveryReport& { return report_; }
    auto plan() const -> const RecoveryPlan& { return plan_; }

private:
    void inject_current();
    void on_response(std::size_t index, std::uint64_t generation, const coap::Message& msg);
    void on_timeout(std::size_t index, std::uint64_t generation);
    void complete_step(StepStatus status);
    void finish();

    RecoveryPlan plan_;
    Scheduler& scheduler_;
    Injector& injector_;
    ReliabilityParams params_;
    std::function<double()> uniform01_;
    DoneHandler on_done_;
    RecoveryReport report_;
    std::size_t current_{0};
    SimDuration current_timeout_{};
    std::optional<TimerId> timer_;
    std::uint64_t generation_{0};
    bool finished_{false};
};

auto execute_plan(RecoveryPlan plan, Scheduler& scheduler, Injector& injector,
                  ReliabilityParams params, PlanExecution::DoneHandler on_done,
                  std::function<double()> uniform01 = {}) -> std::shared_ptr<PlanExecution>;

struct RecoveryConfig {
    Endpoint gateway;
    SimDuration pacing_gap{std::chrono::milliseconds{50}};
    ReliabilityParams reliability;
};

// Startup detection to restoration: reacts to node registrations.
class RecoveryEngine {
public:
    using ReportHandler = std::function<void(const RecoveryReport&)>;

    RecoveryEngine(sd::StateDirectory& directory, Scheduler& scheduler, Injector& injector,
                   RecoveryConfig config, IdSource ids, std::function<double()> uniform01 = {},
                   sd::LogSink log = {});

    // Records the node; when it already has stored state, starts replay and returns
    // the plan. The report arrives later through the report handler.
    auto on_registration(const Address& node) -> std::optional<RecoveryPlan>;

    void set_report_handler(ReportHandler handler) { on_report_ = std::move(handler); }
    auto active(const Address& node) const -> bool;
    auto reports() const -> const std::vector<RecoveryReport>& { return reports_; }

private:
    sd::StateDirectory& directory_;
    Scheduler& scheduler_;
    Injector& injector_;
    RecoveryConfig config_;
    IdSource ids_;
    std::function<double()> uniform01_;
    sd::LogSink log_;
    ReportHandler on_report_;
    std::map<Address, std::shared_ptr<PlanExecution>> running_;
    std::vector<RecoveryReport> reports_;
};

} // namespace coapsd::recovery
