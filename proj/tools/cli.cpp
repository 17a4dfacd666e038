#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/planner.hpp"
#include "qkdnet/sim.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet::cli {

namespace {

namespace fs = std::filesystem;

struct RunOptions {
  std::string topology;
  std::string preset;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool strict = false;
};

struct PlanOptions {
  PlannerParams params;
  std::string geometry = "chain";
  bool integer = false;
  double step_km = 0.5;
  std::string out_dir;
};

Topology load_any_topology(const std::string& path, const std::string& preset_name) {
  if (!path.empty() && !preset_name.empty()) throw Error(Errc::InvalidArgument, "give --topology or --preset, not both");
  if (!path.empty()) return load_topology_file(path);
  return preset(preset_name.empty() ? "vienna" : preset_name);
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write '" + (dir / name).string() + "'");
  f << text;
}

std::string planner_sweep_csv(std::ostream& out) {
  std::string csv = "alpha_db_per_km,relaxed_l_km,closed_form_l_km,integer_l_km_d100\n";
  out << "alpha  relaxed_l  closed_form  integer_l(D=100)\n";
  for (double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    PlannerParams p;
    p.alpha_db_per_km = alpha;
    p.total_distance_km = 100.0;
    const double relaxed = optimal_link_length(p);
    const double closed = closed_form_optimum_km(alpha);
    const double integer = optimal_link_length(p, true);
    csv += format_double(alpha) + "," + format_double(relaxed) + "," + format_double(closed) + "," +
           format_double(integer) + "\n";
    char line[128];
    std::snprintf(line, sizeof line, "%5.2f  %9.2f  %11.3f  %16.2f\n", alpha, relaxed, closed, integer);
    out << line;
  }
  return csv;
}

std::string seconds(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", t);
  return buf;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  Topology topo = load_any_topology(o.topology, o.preset);
  if (o.scenario == "planner-sweep" && !fs::exists(o.scenario)) {
    const std::string csv = planner_sweep_csv(out);
    if (!o.out_dir.empty()) write_text(o.out_dir, "planner_sweep.csv", csv);
    return kExitOk;
  }
  Scenario sc;
  if (fs::exists(o.scenario)) {
    sc = load_scenario_file(o.scenario);
  } else {
    const auto names = builtin_scenario_names();
    if (std::find(names.begin(), names.end(), o.scenario) == names.end()) {
      throw Error(Errc::ScenarioError, "scenario '" + o.scenario + "' is neither a file nor a built-in scenario");
    }
    sc = builtin_scenario(o.scenario, topo);
  }
  const std::uint64_t seed = o.seed.value_or(sc.seed);
  MetricsReport report = run(topo, sc, seed);
  if (!o.out_dir.empty()) write_report(report, o.out_dir);

  bool any_failed = false;
  for (const auto& r : report.records) {
    out << "request " << r.request_id << " " << r.src << ">" << r.dst << " " << r.n_bytes << " B: "
        << to_string(r.status);
    if (r.completion_s) out << " at t=" << seconds(*r.completion_s) << " s";
    out << " via " << r.paths_used.size() << " path(s)";
    if (r.failure) out << " [" << to_string(*r.failure) << "]";
    out << "\n";
    any_failed |= r.status != DeliveryStatus::Delivered;
  }
  for (const auto& rf : report.refills) {
    out << "refill " << rf.link << " +" << rf.bytes << " B at t=" << seconds(rf.time_s)
        << " s: levels " << rf.level_a << "/" << rf.level_b << (rf.identical ? " (identical)" : " (MISMATCH)")
        << "\n";
  }
  for (const auto& e : report.event_errors) out << "event error: " << e << "\n";
  if (report.conservation_violations > 0 || !report.ledgers_exclusive) {
    out << "key accounting violated\n";
    return kExitScenarioFailure;
  }
  return o.strict && any_failed ? kExitScenarioFailure : kExitOk;
}

int cmd_plan(PlanOptions o, std::ostream& out, std::ostream& err) {
  if (o.geometry == "chain") {
    o.params.geometry = Geometry::Chain;
  } else if (o.geometry == "grid") {
    o.params.geometry = Geometry::Grid2D;
  } else {
    err << "unknown geometry '" << o.geometry << "'\n";
    return kExitUsage;
  }
  try {
    o.params.check();
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }
  const double l = optimal_link_length(o.params, o.integer);
  char line[160];
  std::snprintf(line, sizeof line, "l* = %.2f km (%s, %s, D=%g km)\n", l, o.integer ? "integer" : "relaxed",
                to_string(o.params.geometry), o.params.total_distance_km);
  out << line;
  const std::string csv = cost_curve_csv(cost_curve(o.params, o.step_km, o.integer));
  out << csv;
  if (!o.out_dir.empty()) write_text(o.out_dir, "cost_curve.csv", csv);
  return kExitOk;
}

int cmd_validate(const std::string& path, const std::string& preset_name, std::ostream& out) {
  Topology topo = load_any_topology(path, preset_name);
  out << topo.count_links(LinkClass::QbbFiber) << " QBB links, " << topo.count_qan_links()
      << " QAN links, connected: " << (topo.connected() ? "yes" : "no") << "\n";
  return kExitOk;
}

int cmd_scaling(const std::vector<std::uint64_t>& users, std::ostream& out) {
  out << "users,full_mesh_links,network_links\n";
  for (const auto& row : scaling_table(users)) {
    out << row.users << "," << row.full_mesh_links << "," << row.network_links << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trusted-repeater QKD network simulator and planner", "qkdnet"};
  app.require_subcommand(1);

  RunOptions run_opts;
  std::uint64_t seed_value = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write metrics");
  run_cmd->add_option("--topology", run_opts.topology, "Topology file");
  run_cmd->add_option("--preset", run_opts.preset, "Built-in topology: vienna or block");
  run_cmd->add_option("--scenario", run_opts.scenario, "Scenario file or built-in name")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed_value, "Seed (defaults to the scenario's)");
  run_cmd->add_option("--out", run_opts.out_dir, "Output directory; nothing is written without it");
  run_cmd->add_flag("--strict", run_opts.strict, "Exit 3 if any delivery is not Delivered");

  PlanOptions plan_opts;
  auto* plan_cmd = app.add_subcommand("plan", "Optimal link length and cost curve");
  plan_cmd->add_option("--alpha", plan_opts.params.alpha_db_per_km, "Attenuation in dB/km");
  plan_cmd->add_option("--r0", plan_opts.params.r0_bps, "Zero-distance key rate in bit/s");
  plan_cmd->add_option("--device-cost", plan_opts.params.device_cost, "Cost per device");
  plan_cmd->add_option("--distance", plan_opts.params.total_distance_km, "Distance to span in km");
  plan_cmd->add_option("--geometry", plan_opts.geometry, "chain or grid");
  plan_cmd->add_option("--target-rate", plan_opts.params.target_pair_rate_bps, "Target pair rate in bit/s");
  plan_cmd->add_option("--step", plan_opts.step_km, "Cost curve step in km");
  plan_cmd->add_flag("--integer", plan_opts.integer, "Whole number of links");
  plan_cmd->add_option("--out", plan_opts.out_dir, "Directory for cost_curve.csv");

  std::string val_topology, val_preset;
  auto* val_cmd = app.add_subcommand("validate", "Check a topology");
  val_cmd->add_option("--topology", val_topology, "Topology file");
  val_cmd->add_option("--preset", val_preset, "Built-in topology");

  std::vector<std::uint64_t> users;
  auto* scaling_cmd = app.add_subcommand("scaling", "Full-mesh vs network link counts");
  scaling_cmd->add_option("--users", users, "User counts, comma separated")->delimiter(',')->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) {
      if (*seed_opt) run_opts.seed = seed_value;
      return cmd_run(run_opts, out);
    }
    if (*plan_cmd) return cmd_plan(plan_opts, out, err);
    if (*val_cmd) return cmd_validate(val_topology, val_preset, out);
    if (*scaling_cmd) return cmd_scaling(users, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::InvalidArgument ? kExitUsage : kExitConfig;
  }
  return kExitUsage;
}

}  // namespace qkdnet::cli
