#include "qkdnet/link_engine.hpp"

#include <cmath>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {
constexpr double kTimeEpsilon = 1e-9;
}

double key_rate(const DeviceProfile& profile, double length_km) {
  if (length_km < 0.0) throw Error(Errc::InvalidArgument, "negative link length");
  if (length_km > profile.max_length_km) return 0.0;
  return profile.r0_bps * std::pow(10.0, -profile.alpha_db_per_km * length_km / 10.0);
}

bool qualifies_for_deployment(const DeviceProfile& profile) {
  return key_rate(profile, kGateLengthKm) > kGateRateBps && profile.restart_latency_s <= kGateRestartS;
}

const char* to_string(LinkStatus::State s) noexcept {
  switch (s) {
    case LinkStatus::State::Up: return "up";
    case LinkStatus::State::Down: return "down";
    case LinkStatus::State::Restarting: return "restarting";
  }
  return "unknown";
}

LinkRuntime::LinkRuntime(LinkSpec spec, DeviceProfile profile, std::uint64_t seed, ProductionMode mode)
    : spec_(std::move(spec)), profile_(std::move(profile)), mode_(mode), rng_(seed) {}

bool LinkRuntime::advance_to(double now) {
  if (now + kTimeEpsilon < now_) throw Error(Errc::TimeTravel, "link clock cannot move backwards");
  now_ = std::max(now_, now);
  if (state_ == LinkStatus::State::Restarting && now_ + kTimeEpsilon >= up_at_) {
    state_ = LinkStatus::State::Up;
    return true;
  }
  return false;
}

LinkStatus LinkRuntime::status() const {
  LinkStatus s;
  s.state = state_;
  if (state_ == LinkStatus::State::Restarting) s.remaining_s = std::max(0.0, up_at_ - now_);
  return s;
}

double LinkRuntime::rate_bps() const {
  if (state_ != LinkStatus::State::Up) return 0.0;
  if (profile_.night_only && daytime_) return 0.0;
  return key_rate(profile_, spec_.length_km);
}

std::optional<KeyBlock> LinkRuntime::produce_key(double dt_s) {
  if (!(dt_s > 0.0)) throw Error(Errc::InvalidArgument, "production step must be positive");
  const double rate = rate_bps();
  if (rate <= 0.0) return std::nullopt;

  if (mode_ == ProductionMode::Poisson) {
    carry_bits_ += static_cast<double>(rng_.poisson(rate * dt_s));
  } else {
    carry_bits_ += rate * dt_s;
  }
  const auto whole_bytes = static_cast<std::uint64_t>(std::floor(carry_bits_ / 8.0));
  if (whole_bytes == 0) return std::nullopt;
  carry_bits_ -= static_cast<double>(whole_bytes) * 8.0;

  KeyBlock block;
  block.id = allocate_block_id();
  block.origin_link = spec_.id;
  block.bytes = rng_.bytes(whole_bytes);
  produced_bytes_ += whole_bytes;
  return block;
}

void LinkRuntime::fail() {
  state_ = LinkStatus::State::Down;
  carry_bits_ = 0.0;
}

void LinkRuntime::restore() {
  if (state_ != LinkStatus::State::Down) return;
  state_ = LinkStatus::State::Restarting;
  up_at_ = now_ + profile_.restart_latency_s;
  advance_to(now_);
}

}  // namespace qkdnet
