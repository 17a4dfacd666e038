#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdnet/link_engine.hpp"
#include "qkdnet/network.hpp"
#include "qkdnet/topology.hpp"
#include "qkdnet/transport.hpp"

namespace qkdnet {

inline constexpr double kTickSeconds = 0.1;

enum class EventKind {
  ProduceTick,
  MsgArrive,
  LinkFail,
  LinkRestore,
  DosDrain,
  KeyRequest,
  DayWindow,
  RestorePreshared,
  Corrupt,
};
const char* to_string(EventKind kind) noexcept;

struct Event {
  double time_s = 0.0;
  EventKind kind = EventKind::LinkFail;
  std::string link;
  double rate_bytes_per_s = 0.0;  // DosDrain
  double duration_s = 0.0;        // DosDrain
  double start_s = 0.0;           // DayWindow
  double end_s = 0.0;             // DayWindow
  std::uint64_t bytes = 0;        // RestorePreshared
  std::uint64_t count = 0;        // Corrupt
  Channel channel = Channel::Transport;  // Corrupt
  std::optional<KeyDeliveryRequest> request;
};

struct Scenario {
  std::string name;
  double duration_s = 10.0;
  std::uint64_t seed = 0;
  double jitter_s = 0.0;
  double loss_prob = 0.0;
  std::map<std::string, double> link_loss;
  ProductionMode mode = ProductionMode::Deterministic;
  double sample_period_s = 1.0;
  std::vector<Event> events;

  // Errc::ScenarioError on out-of-range times, unknown links or nodes,
  // invalid probabilities or amounts.
  void validate(const Topology& topology) const;
};

// `[scenario] duration= seed= jitter_ms= loss= mode= sample=`,
// `[loss] link= p=`, `[event] t= kind=fail|restore|dos|request|day|
// restore_preshared|corrupt ...`.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& scenario);

// baseline, failover, dos-recovery, multipath. The failover and DoS
// scenarios target the link joining Alice's and Bob's gateways.
std::vector<std::string> builtin_scenario_names();
Scenario builtin_scenario(std::string_view name, const Topology& topology);

struct LevelSample {
  double time_s = 0.0;
  std::string link;
  std::uint64_t level_bytes = 0;
  double rate_bps = 0.0;
};

struct UnusableObservation {
  double time_s = 0.0;
  std::string link;
  std::size_t observers = 0;  // nodes whose database rules the link out
};

struct LinkSummary {
  std::uint64_t produced_bytes = 0;
  std::uint64_t refilled_bytes = 0;
  std::uint64_t ledgered_bytes = 0;   // both ends, both directions
  std::uint64_t transport_bytes = 0;  // sender-side transport channel
  std::uint64_t level_a = 0;
  std::uint64_t level_b = 0;
};

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::vector<LevelSample> samples;
  std::vector<DeliveryRecord> records;
  std::vector<PlaintextExposure> exposures;
  std::vector<HopRecord> hops;
  std::vector<RefillRecord> refills;
  std::vector<UnusableObservation> unusable;
  std::map<std::string, LinkSummary> links;
  std::map<std::string, double> delivered_bps;  // "src>dst"
  std::vector<std::string> event_errors;
  NetworkCounters counters;
  std::uint64_t conservation_violations = 0;
  bool ledgers_exclusive = true;
};

/// Discrete-event run of one scenario: production ticks every 100 ms,
/// periodic level samples, and the scenario's events.
class Engine {
 public:
  Engine(const Topology& topology, const Scenario& scenario, std::uint64_t seed);

  Network& network() { return *network_; }
  const Network& network() const { return *network_; }
  double now() const { return network_->now(); }

  // Errc::TimeTravel if the event lies before now; Errc::ScenarioError if
  // it does not fit the topology.
  void inject(const Event& event);
  void run_until(double t);
  // Runs to the scenario's end and collects the report.
  MetricsReport finish();

 private:
  void apply(const Event& event);
  void sample();

  Topology topology_;
  Scenario scenario_;
  std::uint64_t seed_;
  std::unique_ptr<Network> network_;
  MetricsReport report_;
};

MetricsReport run(const Topology& topology, const Scenario& scenario, std::uint64_t seed);

// time_s,link_id,level_bytes,rate_bps
std::string samples_csv(const MetricsReport& report);
std::string summary_json(const MetricsReport& report);
// time_s,node,request_id,seq,bytes
std::string audit_csv(const MetricsReport& report);
// time_s,link,from,to,request_id,seq,attempt
std::string hops_csv(const MetricsReport& report);
// Writes metrics.csv, summary.json, audit.csv and hops.csv into `dir`.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace qkdnet
