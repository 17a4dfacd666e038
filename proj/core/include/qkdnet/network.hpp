#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/event_queue.hpp"
#include "qkdnet/link_engine.hpp"
#include "qkdnet/q3p.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/routing.hpp"
#include "qkdnet/topology.hpp"
#include "qkdnet/transport.hpp"

namespace qkdnet {

struct NetworkConfig {
  std::uint64_t seed = 0;
  std::uint64_t auth_reserve = kDefaultAuthReserveBytes;
  ProductionMode mode = ProductionMode::Deterministic;
  double latency_s = 0.005;
  double jitter_s = 0.0;  // uniform extra delay in [0, jitter_s)
  double loss_prob = 0.0;
  std::map<std::string, double> link_loss;  // overrides loss_prob per link
  RouteCostParams cost;
  std::size_t mtu = kMtu;
  int max_retransmissions = kMaxRetransmissions;
  std::size_t window = 4;  // unacknowledged segments per (node, link)
  double backoff_s = 0.5;
  int max_backoffs = 20;
  double lsa_keepalive_s = 10.0;
  bool distill_auth = true;  // one authenticated distillation message per block and direction
};

// Refill deliveries draw their ids from here so they never collide with
// ids chosen by a scenario.
inline constexpr std::uint64_t kRefillRequestBase = std::uint64_t{1} << 32;

struct HopRecord {
  double time_s = 0.0;
  std::string link;
  std::string from;
  std::string to;
  std::uint64_t request_id = 0;
  std::uint32_t seq = 0;
  int attempt = 0;
};

struct RefillRecord {
  double time_s = 0.0;
  std::string link;
  std::uint64_t request_id = 0;
  std::uint64_t bytes = 0;
  std::uint64_t level_a = 0;
  std::uint64_t level_b = 0;
  bool identical = false;
};

struct NetworkCounters {
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_lost = 0;
  std::uint64_t messages_dropped_down = 0;
  std::uint64_t messages_corrupted = 0;
  std::uint64_t tag_failures = 0;
  std::uint64_t replays = 0;
  std::uint64_t lsas_originated = 0;
  std::uint64_t lsa_messages = 0;
  std::uint64_t lsa_retransmissions = 0;
  std::uint64_t acks = 0;
  std::uint64_t distill_messages = 0;
  std::uint64_t spam_messages = 0;
};

/// The running network: one node module per node (key stores, routing
/// agent, transport queues) and one QKD link runtime per link, all driven by
/// a single event queue. Classical messages take `latency_s` plus jitter
/// and stay in order per link direction.
class Network {
 public:
  Network(Topology topology, NetworkConfig config);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  EventQueue& queue() { return queue_; }
  double now() const { return queue_.now(); }
  const Topology& topology() const { return topology_; }
  const NetworkConfig& config() const { return config_; }

  const LinkRuntime& runtime(const std::string& link) const;
  Q3PEndpoint& endpoint(const std::string& node, const std::string& link);
  const Q3PEndpoint& endpoint(const std::string& node, const std::string& link) const;
  const RoutingAgent& agent(const std::string& node) const;
  bool link_up(const std::string& link) const;
  // min(level at a, level at b)
  std::uint64_t link_level(const std::string& link) const;

  // Originates every node's first advertisements and floods them.
  void start();
  // One production step of dt for every link at the current time.
  void tick(double dt);
  void fail_link(const std::string& link);
  void restore_link(const std::string& link);
  void set_daytime(bool daytime);
  // Forces authenticated spam over `link` at `bytes_per_s` of key (split
  // across both directions) for `duration_s`.
  void start_dos(const std::string& link, double bytes_per_s, double duration_s);
  // The next `count` messages on `channel` over `link` vanish / get one bit flipped.
  void inject_loss(const std::string& link, std::uint64_t count, Channel channel = Channel::Transport);
  void inject_corruption(const std::string& link, std::uint64_t count, Channel channel = Channel::Transport);

  // Queues a delivery. With no route at submission the record is final
  // (Failed, NoRoute) immediately.
  std::uint64_t submit(KeyDeliveryRequest request);
  // Submits and runs the queue until the record is final. Errc::NoRoute
  // when no path exists at submission.
  DeliveryRecord deliver_key(KeyDeliveryRequest request, double horizon_s = 120.0);
  // Delivers n bytes between the link's endpoints over other links and
  // pushes them into both ends of the link. Errc::NoRoute on a cut.
  std::uint64_t restore_preshared(const std::string& link, std::uint64_t n_bytes);

  std::uint64_t next_request_id() const { return next_request_id_; }
  const DeliveryRecord& record(std::uint64_t id) const;
  const std::map<std::uint64_t, DeliveryRecord>& records() const { return records_; }
  const std::vector<PlaintextExposure>& exposures() const { return exposures_; }
  const std::vector<HopRecord>& hops() const { return hops_; }
  const std::vector<RefillRecord>& refills() const { return refills_; }
  const NetworkCounters& counters() const { return counters_; }
  bool all_requests_finished() const;
  std::uint64_t messages_in_flight() const { return in_flight_; }

  // Every directional store's ledger is free of overlapping ranges.
  bool ledgers_exclusive() const;
  // initial + pushed = available + ledgered for every store, and each end
  // received exactly what its link produced plus refills.
  bool accounting_exact() const;

 private:
  struct Envelope {
    std::string link;
    std::string from;
    std::string to;
    Q3PMessage msg;
    std::vector<std::string> path;   // transport: remaining nodes from `to`
    std::vector<std::string> links;  // transport: remaining links from `to`
    std::uint64_t epoch = 0;
  };

  struct Job {
    std::uint64_t request = 0;
    std::uint32_t seq = 0;
    std::uint32_t total = 0;
    Bytes fragment;
    std::vector<std::string> path;   // holder first
    std::vector<std::string> links;  // path.size() - 1 links
    std::set<std::string> avoid;
    int attempts = 0;
    int backoffs = 0;
  };

  struct InFlight {
    Job job;
    std::uint64_t token = 0;
  };

  using SegKey = std::pair<std::uint64_t, std::uint32_t>;
  using LsaKey = std::pair<std::string, std::string>;  // (link, origin)

  // An advertisement sent to a neighbor and not yet acknowledged.
  struct LsaWait {
    std::uint64_t seq = 0;
    int attempts = 0;
    double deadline = 0.0;
  };

  struct NodeState {
    explicit NodeState(RoutingAgent a) : agent(std::move(a)) {}
    RoutingAgent agent;
    std::map<std::string, Q3PEndpoint> endpoints;
    std::map<std::string, std::deque<Job>> outq;
    std::map<std::string, std::map<SegKey, InFlight>> inflight;
    std::set<SegKey> seen;
    std::map<std::string, std::map<LsaKey, LsaWait>> lsa_wait;  // by link
  };

  struct LinkState {
    LinkState(LinkRuntime rt, Rng r) : runtime(std::move(rt)), rng(std::move(r)) {}
    LinkRuntime runtime;
    Rng rng;
    std::uint64_t epoch = 0;
    double last_arrival[2] = {0.0, 0.0};
    std::map<Channel, std::uint64_t> drop_next;
    std::map<Channel, std::uint64_t> corrupt_next;
    double dos_rate = 0.0;
    double dos_until = 0.0;
    double dos_carry[2] = {0.0, 0.0};
    std::uint64_t refilled = 0;
  };

  enum class SegState { Pending, Delivered, Failed };

  struct RequestState {
    KeyDeliveryRequest request;
    std::vector<SegState> segs;
    std::map<std::uint32_t, Bytes> received;
    std::optional<std::string> refill_link;
    bool refilled = false;
  };

  NodeState& node(const std::string& name);
  LinkState& link_state(const std::string& link);
  const LinkState& link_state(const std::string& link) const;

  void transmit(Envelope env);
  void arrive(Envelope env);
  void refresh_lsas(const std::string& node_name);
  void flush_lsas(const std::string& node_name);
  void on_lsa_ack(const std::string& node_name, const std::string& link, const LsaKey& key, std::uint64_t seq);
  void on_lsa_timeout(const std::string& node_name, const std::string& link, const LsaKey& key, std::uint64_t seq);
  void send_control(const std::string& node_name, const std::string& link, const Bytes& payload);

  void pump(const std::string& node_name, const std::string& link);
  void reroute(const std::string& node_name, Job job, const std::string& bad_link);
  void on_segment(const std::string& node_name, const std::string& link, const TransportSegment& seg,
                  const Envelope& env);
  void on_ack(const std::string& node_name, const std::string& link, SegKey key);
  void on_timeout(const std::string& node_name, const std::string& link, SegKey key, std::uint64_t token);
  void resolve(std::uint64_t request, std::uint32_t seq, SegState state, std::optional<Errc> failure = {});
  void finalize(std::uint64_t request);
  void dos_tick(const std::string& link);

  double rto() const;

  Topology topology_;
  NetworkConfig config_;
  EventQueue queue_;
  std::map<std::string, NodeState> nodes_;
  std::map<std::string, LinkState> links_;
  std::map<std::uint64_t, RequestState> requests_;
  std::map<std::uint64_t, DeliveryRecord> records_;
  std::vector<PlaintextExposure> exposures_;
  std::vector<HopRecord> hops_;
  std::vector<RefillRecord> refills_;
  NetworkCounters counters_;
  std::uint64_t next_request_id_ = 1;
  std::uint64_t next_refill_id_ = 0;
  std::uint64_t next_token_ = 1;
  std::uint64_t in_flight_ = 0;
};

}  // namespace qkdnet
