#include "qkdnet/event_queue.hpp"

#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"

namespace qkdnet {

void EventQueue::schedule(double t, Action action) {
  if (t < now_) {
    throw Error(Errc::TimeTravel, "event at t=" + format_double(t) + " is before now=" + format_double(now_));
  }
  heap_.push(Item{t, next_seq_++, std::move(action)});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  // priority_queue::top is const; the action is moved out before pop.
  Item item = std::move(const_cast<Item&>(heap_.top()));
  heap_.pop();
  now_ = item.t;
  ++processed_;
  item.action();
  return true;
}

void EventQueue::run_until(double t) {
  if (t < now_) throw Error(Errc::TimeTravel, "cannot run back to t=" + format_double(t));
  while (!heap_.empty() && heap_.top().t <= t) step();
  now_ = t;
}

bool EventQueue::run_while_pending(const std::function<bool()>& done, double horizon) {
  while (!done() && !heap_.empty() && heap_.top().t <= horizon) step();
  return done();
}

}  // namespace qkdnet
