#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qkdnet {

enum class Geometry { Chain, Grid2D };
const char* to_string(Geometry g) noexcept;

struct PlannerParams {
  double device_cost = 1.0;
  double r0_bps = 10000.0;
  double alpha_db_per_km = 0.2;
  double total_distance_km = 100.0;
  Geometry geometry = Geometry::Chain;
  double target_pair_rate_bps = 1000.0;

  // Errc::InvalidArgument unless every field is positive and finite.
  void check() const;
};

// Share of relayed key left after 32 bytes of per-hop tag key on every
// 1024-byte segment.
inline constexpr double kRelayEfficiency = 1024.0 / 1056.0;
inline constexpr double kScanStepKm = 0.01;

double planner_link_rate(const PlannerParams& params, double l_km);
// Links needed to span D with hops of at most l.
std::uint64_t hop_count(double total_km, double l_km);
// Bottleneck rate of ceil(D/l) identical links; relayed chains pay the
// tag overhead.
double chain_rate(double total_km, double l_km, const PlannerParams& params);
// Devices spent per bit/s of end-to-end rate: 2 devices per link of the
// chain, or of the average grid route for Grid2D.
double cost_per_bit(double total_km, double l_km, const PlannerParams& params);
// Same with the link count relaxed to the real number D/l.
double relaxed_cost_per_bit(double total_km, double l_km, const PlannerParams& params);

// Stationary point of (1/l) * 10^(alpha l / 10).
double closed_form_optimum_km(double alpha_db_per_km);

// Argmin over l = 0.01, 0.02, ..., D of the relaxed (default) or integer
// objective. The first minimum wins ties.
double optimal_link_length(const PlannerParams& params, bool integer = false);

struct CurvePoint {
  double l_km = 0.0;
  double rate_bps = 0.0;
  double cost_per_bit = 0.0;
};
std::vector<CurvePoint> cost_curve(const PlannerParams& params, double step_km = 0.5, bool integer = false);
// l_km,rate_bps,cost_per_bit
std::string cost_curve_csv(const std::vector<CurvePoint>& curve);

// Parallel chains of link length l needed to reach the target pair rate.
std::uint64_t parallel_chains_needed(const PlannerParams& params, double l_km);

struct ScalingRow {
  std::uint64_t users = 0;
  std::uint64_t full_mesh_links = 0;
  std::uint64_t network_links = 0;

  friend bool operator==(const ScalingRow&, const ScalingRow&) = default;
};
std::vector<ScalingRow> scaling_table(const std::vector<std::uint64_t>& users);

}  // namespace qkdnet
