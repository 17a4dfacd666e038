#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace qkdnet {

/// Virtual-time scheduler. Events fire in (time, insertion order) order, so
/// two events scheduled for the same instant run in the order they were
/// queued.
class EventQueue {
 public:
  using Action = std::function<void()>;

  double now() const { return now_; }
  // Errc::TimeTravel if t < now().
  void schedule(double t, Action action);
  void schedule_in(double dt, Action action) { schedule(now_ + dt, std::move(action)); }

  // Runs the earliest event. Returns false when nothing is queued.
  bool step();
  // Runs every event with time <= t, then parks the clock at t.
  void run_until(double t);
  // Runs until `done()` holds or the queue drains; returns done().
  bool run_while_pending(const std::function<bool()>& done, double horizon);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t processed() const { return processed_; }

 private:
  struct Item {
    double t;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Item& x, const Item& y) const { return x.t != y.t ? x.t > y.t : x.seq > y.seq; }
  };

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::priority_queue<Item, std::vector<Item>, Later> heap_;
};

}  // namespace qkdnet
