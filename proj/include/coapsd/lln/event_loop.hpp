#pragma once

#include "coapsd/core/sim_time.hpp"

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace coapsd::lln {

// Discrete-event loop. Events at equal times pop in scheduling order, so a run is a
// pure function of the scenario and the RNG seed.
class EventLoop final : public Scheduler {
public:
    auto now() const -> SimTime override { return now_; }
    auto schedule_after(SimDuration delay, std::function<void()> fn) -> TimerId override;
    auto schedule_at(SimTime at, std::function<void()> fn) -> TimerId;
    void cancel(TimerId id) override;

    // Runs one event. Returns false when the queue is empty.
    auto step() -> bool;
    // Runs every event with time <= until, then advances the clock to until.
    void run_until(SimTime until);
    // Runs until the queue drains or the clock would pass limit.
    void run_until_idle(SimTime limit);

    auto pending() const -> std::size_t { return live_.size(); }
    auto executed() const -> std::uint64_t { return executed_; }

private:
    struct Event {
        SimTime at;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        auto operator()(const Event& a, const Event& b) const -> bool {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    SimTime now_{};
    std::uint64_t next_seq_{1};
    std::uint64_t executed_{0};
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::unordered_set<std::uint64_t> live_; // scheduled, not yet run or cancelled
};

} // namespace coapsd::lln
