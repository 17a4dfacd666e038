#include "qkdnet/planner.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

const char* to_string(Geometry g) noexcept { return g == Geometry::Chain ? "chain" : "grid"; }

void PlannerParams::check() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(Errc::InvalidArgument, std::string(what) + " must be positive, got " + format_double(v));
    }
  };
  positive(device_cost, "device cost");
  positive(r0_bps, "r0");
  positive(alpha_db_per_km, "alpha");
  positive(total_distance_km, "distance");
  positive(target_pair_rate_bps, "target rate");
}

double planner_link_rate(const PlannerParams& params, double l_km) {
  return params.r0_bps * std::pow(10.0, -params.alpha_db_per_km * l_km / 10.0);
}

std::uint64_t hop_count(double total_km, double l_km) {
  if (!(l_km > 0.0) || !(total_km > 0.0)) throw Error(Errc::InvalidArgument, "lengths must be positive");
  // Scan points such as 100 / 0.25 must not pick up an extra hop from
  // rounding noise.
  const double ratio = total_km / l_km;
  const double n = std::ceil(ratio - 1e-9 * ratio);
  return static_cast<std::uint64_t>(std::max(1.0, n));
}

double chain_rate(double total_km, double l_km, const PlannerParams& params) {
  if (!(l_km > 0.0) || l_km > total_km * (1 + 1e-12)) throw Error(Errc::InvalidArgument, "need 0 < l <= D");
  const double r = planner_link_rate(params, l_km);
  return hop_count(total_km, l_km) >= 2 ? r * kRelayEfficiency : r;
}

namespace {

// Mean Manhattan distance between two uniformly drawn nodes of an
// (n+1) x (n+1) grid, in hops.
double grid_mean_hops(double n) { return 2.0 * n * (n + 2.0) / (3.0 * (n + 1.0)); }

}  // namespace

double cost_per_bit(double total_km, double l_km, const PlannerParams& params) {
  const double n = static_cast<double>(hop_count(total_km, l_km));
  const double hops = params.geometry == Geometry::Chain ? n : grid_mean_hops(n);
  return 2.0 * hops * params.device_cost / chain_rate(total_km, l_km, params);
}

double relaxed_cost_per_bit(double total_km, double l_km, const PlannerParams& params) {
  if (!(l_km > 0.0)) throw Error(Errc::InvalidArgument, "link length must be positive");
  const double n = total_km / l_km;
  const double hops = params.geometry == Geometry::Chain ? n : 2.0 * n / 3.0;
  return 2.0 * hops * params.device_cost / (planner_link_rate(params, l_km) * kRelayEfficiency);
}

double closed_form_optimum_km(double alpha_db_per_km) {
  if (!(alpha_db_per_km > 0.0)) throw Error(Errc::InvalidArgument, "alpha must be positive");
  return 10.0 / (alpha_db_per_km * std::log(10.0));
}

double optimal_link_length(const PlannerParams& params, bool integer) {
  params.check();
  const double D = params.total_distance_km;
  const auto steps = static_cast<std::uint64_t>(std::floor(D / kScanStepKm + 1e-9));
  if (steps == 0) return D;
  double best_l = kScanStepKm;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double l = static_cast<double>(k) * kScanStepKm;
    const double c = integer ? cost_per_bit(D, l, params) : relaxed_cost_per_bit(D, l, params);
    if (c < best) {
      best = c;
      best_l = l;
    }
  }
  return best_l;
}

std::vector<CurvePoint> cost_curve(const PlannerParams& params, double step_km, bool integer) {
  params.check();
  if (!(step_km > 0.0)) throw Error(Errc::InvalidArgument, "step must be positive");
  const double D = params.total_distance_km;
  std::vector<CurvePoint> out;
  const auto steps = static_cast<std::uint64_t>(std::floor(D / step_km + 1e-9));
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double l = static_cast<double>(k) * step_km;
    out.push_back({l, chain_rate(D, l, params),
                   integer ? cost_per_bit(D, l, params) : relaxed_cost_per_bit(D, l, params)});
  }
  return out;
}

std::string cost_curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "l_km,rate_bps,cost_per_bit\n";
  for (const auto& p : curve) {
    out << format_double(p.l_km) << ',' << format_double(p.rate_bps) << ',' << format_double(p.cost_per_bit) << '\n';
  }
  return out.str();
}

std::uint64_t parallel_chains_needed(const PlannerParams& params, double l_km) {
  params.check();
  const double r = chain_rate(params.total_distance_km, l_km, params);
  return static_cast<std::uint64_t>(std::ceil(params.target_pair_rate_bps / r));
}

std::vector<ScalingRow> scaling_table(const std::vector<std::uint64_t>& users) {
  std::vector<ScalingRow> out;
  for (auto n : users) out.push_back({n, full_mesh_link_count(n), network_access_link_count(n)});
  return out;
}

}  // namespace qkdnet
