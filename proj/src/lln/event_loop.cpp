#include "coapsd/lln/event_loop.hpp"

#include <stdexcept>

namespace coapsd::lln {

auto EventLoop::schedule_after(SimDuration delay, std::function<void()> fn) -> TimerId {
    if (delay < SimDuration::zero()) delay = SimDuration::zero();
    return schedule_at(now_ + delay, std::move(fn));
}

auto EventLoop::schedule_at(SimTime at, std::function<void()> fn) -> TimerId {
    if (at < now_) {
        throw std::logic_error("event scheduled in the past");
    }
    const auto seq = next_seq_++;
    queue_.push(Event{at, seq, std::move(fn)});
    live_.insert(seq);
    return seq;
}

void EventLoop::cancel(TimerId id) {
    live_.erase(id);
}

auto EventLoop::step() -> bool {
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        if (live_.erase(ev.seq) == 0) continue;
        now_ = ev.at;
        ++executed_;
        ev.fn();
        return true;
    }
    return false;
}

void EventLoop::run_until(SimTime until) {
    run_until_idle(until);
    if (until > now_) now_ = until;
}

void EventLoop::run_until_idle(SimTime limit) {
    while (!queue_.empty()) {
        const auto& top = queue_.top();
        if (!live_.contains(top.seq)) {
            queue_.pop();
            continue;
        }
        if (top.at > limit) break;
        step();
    }
}

} // namespace coapsd::lln
