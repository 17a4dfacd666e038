#pragma once

#include <cstdint>
#include <optional>

#include "qkdnet/key_store.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

inline constexpr double kGateLengthKm = 25.0;
inline constexpr double kGateRateBps = 1000.0;
inline constexpr double kGateRestartS = 60.0;

/// Net secret-key rate of a device over `length_km` of fiber:
/// r0 * 10^(-alpha * l / 10), and zero beyond the device's operating limit.
double key_rate(const DeviceProfile& profile, double length_km);

/// Deployment gate: strictly more than 1 kbit/s at 25 km and a restart
/// latency of at most one minute.
bool qualifies_for_deployment(const DeviceProfile& profile);

enum class ProductionMode { Deterministic, Poisson };

struct LinkStatus {
  enum class State { Up, Down, Restarting };
  State state = State::Up;
  double remaining_s = 0.0;  // only meaningful while Restarting

  bool up() const { return state == State::Up; }
};

const char* to_string(LinkStatus::State s) noexcept;

/// A QKD link as a secret-key source. Owned by the simulation loop; time
/// only moves forward through advance_to().
class LinkRuntime {
 public:
  LinkRuntime(LinkSpec spec, DeviceProfile profile, std::uint64_t seed,
              ProductionMode mode = ProductionMode::Deterministic);

  const LinkSpec& spec() const { return spec_; }
  const DeviceProfile& profile() const { return profile_; }

  // Moves the link clock forward; completes a pending restart once the
  // profile's restart latency has elapsed. Returns true if the link came up.
  bool advance_to(double now);
  double now() const { return now_; }

  LinkStatus status() const;
  double rate_bps() const;

  // Produces floor(rate*dt + carry) bits rounded down to whole bytes; the
  // remainder stays in the carry. Nothing while the link is not Up.
  std::optional<KeyBlock> produce_key(double dt_s);

  void fail();
  void restore();
  void set_daytime(bool daytime) { daytime_ = daytime; }
  bool daytime() const { return daytime_; }

  // Bits accumulated but not yet emitted, in [0, 8).
  double carry_bits() const { return carry_bits_; }
  std::uint64_t produced_bytes() const { return produced_bytes_; }
  // Block ids are shared with refills pushed from outside the link.
  std::uint64_t allocate_block_id() { return ++last_block_id_; }

 private:
  LinkSpec spec_;
  DeviceProfile profile_;
  ProductionMode mode_;
  Rng rng_;
  LinkStatus::State state_ = LinkStatus::State::Up;
  double now_ = 0.0;
  double up_at_ = 0.0;
  double carry_bits_ = 0.0;
  bool daytime_ = false;
  std::uint64_t produced_bytes_ = 0;
  std::uint64_t last_block_id_ = 0;
};

}  // namespace qkdnet
