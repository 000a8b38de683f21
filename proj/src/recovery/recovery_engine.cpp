#include "coapsd/recovery/recovery_engine.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace coapsd::recovery {

using coap::Code;
using coap::Message;
using coap::MessageType;
using sd::EntryType;
using sd::SdEntry;

auto to_string(StepStatus s) -> std::string_view {
    switch (s) {
    case StepStatus::Pending: return "pending";
    case StepStatus::Acked: return "acked";
    case StepStatus::Rejected: return "rejected";
    case StepStatus::TimedOut: return "timed_out";
    case StepStatus::Aborted: return "aborted";
    }
    return "?";
}

namespace {

auto replay_phase(EntryType t) -> int {
    return (t == EntryType::Put || t == EntryType::Deploy) ? 0 : 1;
}

auto base_request(Code code, const SdEntry& e, IdSource& ids) -> Message {
    Message m;
    m.type = MessageType::Confirmable;
    m.code = code;
    m.mid = ids.next_mid();
    m.options.set_path(e.uri_path);
    return m;
}

} // namespace

auto build_plan(std::span<const SdEntry> entries, const Endpoint& gateway, IdSource& ids,
                SimDuration pacing_gap) -> RecoveryPlan {
    RecoveryPlan plan;
    plan.pacing_gap = pacing_gap;
    if (entries.empty()) return plan;
    plan.node = entries.front().server.addr;

    std::vector<const SdEntry*> ordered;
    ordered.reserve(entries.size());
    for (const auto& e : entries) ordered.push_back(&e);
    std::stable_sort(ordered.begin(), ordered.end(), [](const SdEntry* a, const SdEntry* b) {
        const int pa = replay_phase(a->type);
        const int pb = replay_phase(b->type);
        if (pa != pb) return pa < pb;
        if (a->created_at != b->created_at) return a->created_at < b->created_at;
        return a->id < b->id;
    });

    for (const SdEntry* e : ordered) {
        ReplayStep step;
        step.origin = e->type;
        step.entry = e->id;
        step.destination = e->server;
        step.suppress_response = true;

        switch (e->type) {
        case EntryType::Put: {
            step.message = base_request(Code::Put, *e, ids);
            step.message.token = ids.next_token();
            step.message.options.content_format = e->content_format;
            step.message.payload = e->value;
            step.spoofed_source = e->client;
            plan.steps.push_back(std::move(step));
            break;
        }
        case EntryType::Observe: {
            // Stored token keeps the client's notification matching intact; the observe
            // value continues the counter the client last saw.
            step.message = base_request(Code::Get, *e, ids);
            step.message.token = e->token;
            // A stored 1 resumes at 2.
            step.message.options.observe = e->observe_counter == 1 ? 2 : e->observe_counter;
            step.spoofed_source = e->client;
            plan.steps.push_back(std::move(step));
            break;
        }
        case EntryType::Bind: {
            step.message = base_request(Code::Get, *e, ids);
            step.message.token = ids.next_token();
            step.message.options.observe = 0;
            step.message.options.binding = e->binding;
            step.spoofed_source = gateway;
            plan.steps.push_back(std::move(step));
            break;
        }
        case EntryType::Deploy: {
            const auto& d = *e->deploy;
            const std::string query = "file=" + d.filename;
            if (!d.blocks) {
                step.message = base_request(Code::Post, *e, ids);
                step.message.options.set_path(d.loader_path);
                step.message.options.uri_query = {query};
                step.message.token = ids.next_token();
                step.spoofed_source = gateway;
                plan.steps.push_back(std::move(step));
                break;
            }
            const auto& blocks = *d.blocks;
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                ReplayStep b = step;
                b.message = base_request(Code::Post, *e, ids);
                b.message.options.set_path(d.loader_path);
                b.message.options.uri_query = {query};
                b.message.options.block1 =
                    coap::BlockOption{static_cast<std::uint32_t>(i), i + 1 < blocks.size(),
                                      d.block_size};
                b.message.token = ids.next_token();
                b.message.payload = blocks[i];
                b.spoofed_source = gateway;
                plan.steps.push_back(std::move(b));
            }
            break;
        }
        }
    }
    return plan;
}

PlanExecution::PlanExecution(RecoveryPlan plan, Scheduler& scheduler, Injector& injector,
                             ReliabilityParams params, std::function<double()> uniform01,
                             DoneHandler on_done)
    : plan_{std::move(plan)},
      scheduler_{scheduler},
      injector_{injector},
      params_{params},
      uniform01_{std::move(uniform01)},
      on_done_{std::move(on_done)} {
    report_.node = plan_.node;
    report_.steps.reserve(plan_.steps.size());
    for (std::size_t i = 0; i < plan_.steps.size(); ++i) {
        StepOutcome o;
        o.index = i;
        o.origin = plan_.steps[i].origin;
        report_.steps.push_back(o);
    }
}

void PlanExecution::start(std::optional<SimTime> started_at) {
    report_.started_at = started_at.value_or(scheduler_.now());
    if (plan_.steps.empty()) {
        finish();
        return;
    }
    current_ = 0;
    inject_current();
}

void PlanExecution::inject_current() {
    auto& outcome = report_.steps[current_];
    outcome.injected_at = scheduler_.now();
    double factor = 1.0;
    if (uniform01_ && params_.ack_random_factor > 1.0) {
        factor += (params_.ack_random_factor - 1.0) * uniform01_();
    }
    current_timeout_ = SimDuration{
        static_cast<std::int64_t>(static_cast<double>(params_.ack_timeout.count()) * factor)};

    const auto index = current_;
    const auto generation = generation_;
    std::weak_ptr<PlanExecution> weak = weak_from_this();
    injector_.inject(plan_.steps[index], [weak, index, generation](const Message& msg) {
        if (auto self = weak.lock()) self->on_response(index, generation, msg);
    });
    timer_ = scheduler_.schedule_after(current_timeout_, [weak, index, generation] {
        if (auto self = weak.lock()) self->on_timeout(index, generation);
    });
}

void PlanExecution::on_response(std::size_t index, std::uint64_t generation, const Message& msg) {
    if (finished_ || generation != generation_ || index != current_) return;
    auto& outcome = report_.steps[index];
    if (outcome.status != StepStatus::Pending) return;
    outcome.response_code = msg.code;
    complete_step(msg.type == MessageType::Reset ? StepStatus::Rejected : StepStatus::Acked);
}

void PlanExecution::on_timeout(std::size_t index, std::uint64_t generation) {
    if (finished_ || generation != generation_ || index != current_) return;
    timer_.reset();
    auto& outcome = report_.steps[index];
    if (outcome.retransmissions < params_.max_retransmit) {
        ++outcome.retransmissions;
        current_timeout_ *= 2;
        const auto gen = generation_;
        std::weak_ptr<PlanExecution> weak = weak_from_this();
        injector_.inject(plan_.steps[index], [weak, index, gen](const Message& msg) {
            if (auto self = weak.lock()) self->on_response(index, gen, msg);
        });
        timer_ = scheduler_.schedule_after(current_timeout_, [weak, index, gen] {
            if (auto self = weak.lock()) self->on_timeout(index, gen);
        });
        return;
    }
    complete_step(StepStatus::TimedOut);
}

void PlanExecution::complete_step(StepStatus status) {
    if (timer_) {
        scheduler_.cancel(*timer_);
        timer_.reset();
    }
    auto& outcome = report_.steps[current_];
    outcome.status = status;
    outcome.finished_at = scheduler_.now();
    if (status != StepStatus::Acked) report_.complete = false;

    ++current_;
    if (current_ >= plan_.steps.size()) {
        finish();
        return;
    }
    const auto generation = generation_;
    std::weak_ptr<PlanExecution> weak = weak_from_this();
    timer_ = scheduler_.schedule_after(plan_.pacing_gap, [weak, generation] {
        auto self = weak.lock();
        if (!self || self->finished_ || generation != self->generation_) return;
        self->timer_.reset();
        self->inject_current();
    });
}

void PlanExecution::abort() {
    if (finished_) return;
    ++generation_;
    if (timer_) {
        scheduler_.cancel(*timer_);
        timer_.reset();
    }
    for (auto& s : report_.steps) {
        if (s.status == StepStatus::Pending) s.status = StepStatus::Aborted;
    }
    report_.aborted = true;
    report_.complete = false;
    finish();
}

void PlanExecution::finish() {
    auto keep_alive = weak_from_this().lock(); // on_done_ may drop the last owner
    finished_ = true;
    report_.finished_at = report_.steps.empty() ? report_.started_at : scheduler_.now();
    if (!report_.aborted && !report_.steps.empty()) {
        report_.finished_at = report_.steps.back().finished_at;
    }
    report_.recovery_delay = report_.finished_at - report_.started_at;
    if (on_done_) on_done_(report_);
}

auto execute_plan(RecoveryPlan plan, Scheduler& scheduler, Injector& injector,
                  ReliabilityParams params, PlanExecution::DoneHandler on_done,
                  std::function<double()> uniform01) -> std::shared_ptr<PlanExecution> {
    auto exec = std::make_shared<PlanExecution>(std::move(plan), scheduler, injector, params,
                                                std::move(uniform01), std::move(on_done));
    exec->start();
    return exec;
}

RecoveryEngine::RecoveryEngine(sd::StateDirectory& directory, Scheduler& scheduler,
                               Injector& injector, RecoveryConfig config, IdSource ids,
                               std::function<double()> uniform01, sd::LogSink log)
    : directory_{directory},
      scheduler_{scheduler},
      injector_{injector},
      config_{config},
      ids_{std::move(ids)},
      uniform01_{std::move(uniform01)},
      log_{std::move(log)} {}

auto RecoveryEngine::on_registration(const Address& node) -> std::optional<RecoveryPlan> {
    if (log_) log_("SM Check and Start Recovery");
    const auto status = directory_.register_node(node);

    if (auto it = running_.find(node); it != running_.end()) {
        // A fresh registration means the node rebooted again; the old run is moot.
        auto exec = it->second;
        running_.erase(it);
        exec->abort();
    }

    if (status != sd::Registration::KnownWithState) {
        if (log_) log_("SM End Recovery");
        return std::nullopt;
    }

    const auto entries = directory_.entries_for_server(node);
    auto plan = build_plan(entries, config_.gateway, ids_, config_.pacing_gap);
    if (log_) log_(fmt::format("Recover State Info: {} step(s)", plan.steps.size()));

    auto exec = std::make_shared<PlanExecution>(
        plan, scheduler_, injector_, config_.reliability, uniform01_,
        [this, node](const RecoveryReport& report) {
            if (auto it = running_.find(node);
                it != running_.end() && &it->second->report() == &report) {
                running_.erase(it);
            }
            reports_.push_back(report);
            if (on_report_) on_report_(report);
        });
    running_[node] = exec;
    exec->start();
    return plan;
}

auto RecoveryEngine::active(const Address& node) const -> bool {
    return running_.contains(node);
}

} // namespace coapsd::recovery
