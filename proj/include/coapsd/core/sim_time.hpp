#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace coapsd {

// Simulated time. Microsecond resolution keeps event ordering exact.
using SimDuration = std::chrono::microseconds;
using SimTime = std::chrono::microseconds; // offset from scenario start

constexpr auto sim_ms(double ms) -> SimDuration {
    return SimDuration{static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5))};
}

constexpr auto to_ms(SimDuration d) -> double {
    return static_cast<double>(d.count()) / 1000.0;
}

using TimerId = std::uint64_t;

// Source of simulated time and deferred callbacks. Implemented by the event loop.
class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual auto now() const -> SimTime = 0;
    virtual auto schedule_after(SimDuration delay, std::function<void()> fn) -> TimerId = 0;
    virtual void cancel(TimerId id) = 0;
};

} // namespace coapsd
