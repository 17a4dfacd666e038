#include "qkdnet/network.hpp"

#include <algorithm>
#include <cmath>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {

constexpr std::uint8_t kAckType = 0x01;
constexpr std::uint8_t kSpamType = 0x02;
constexpr std::uint8_t kLsaAckType = 0x03;
constexpr SealFlags kAuthOnly{false, true};

}  // namespace

Network::Network(Topology topology, NetworkConfig config) : topology_(std::move(topology)), config_(std::move(config)) {
  topology_.validate();
  for (const auto& [name, n] : topology_.nodes()) {
    nodes_.emplace(name, NodeState(RoutingAgent(name, topology_, config_.auth_reserve)));
  }
  for (const auto& [id, l] : topology_.links()) {
    Rng preshared_rng(derive_seed(config_.seed, "preshared:" + id));
    const Bytes preshared = preshared_rng.bytes(l.preshared_bytes);
    node(l.a).endpoints.emplace(id, Q3PEndpoint(id, l.a, l.b, true, preshared, config_.auth_reserve));
    node(l.b).endpoints.emplace(id, Q3PEndpoint(id, l.b, l.a, false, preshared, config_.auth_reserve));
    links_.emplace(id, LinkState(LinkRuntime(l, topology_.profile_of(l), derive_seed(config_.seed, "link:" + id),
                                             config_.mode),
                                 Rng(derive_seed(config_.seed, "net:" + id))));
  }
}

Network::NodeState& Network::node(const std::string& name) {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(Errc::InvalidArgument, "unknown node '" + name + "'");
  return it->second;
}

Network::LinkState& Network::link_state(const std::string& link) {
  auto it = links_.find(link);
  if (it == links_.end()) throw Error(Errc::InvalidArgument, "unknown link '" + link + "'");
  return it->second;
}

const Network::LinkState& Network::link_state(const std::string& link) const {
  auto it = links_.find(link);
  if (it == links_.end()) throw Error(Errc::InvalidArgument, "unknown link '" + link + "'");
  return it->second;
}

const LinkRuntime& Network::runtime(const std::string& link) const { return link_state(link).runtime; }

Q3PEndpoint& Network::endpoint(const std::string& node_name, const std::string& link) {
  auto& eps = node(node_name).endpoints;
  auto it = eps.find(link);
  if (it == eps.end()) throw Error(Errc::InvalidArgument, "node '" + node_name + "' has no link '" + link + "'");
  return it->second;
}

const Q3PEndpoint& Network::endpoint(const std::string& node_name, const std::string& link) const {
  auto n = nodes_.find(node_name);
  if (n == nodes_.end()) throw Error(Errc::InvalidArgument, "unknown node '" + node_name + "'");
  auto it = n->second.endpoints.find(link);
  if (it == n->second.endpoints.end()) {
    throw Error(Errc::InvalidArgument, "node '" + node_name + "' has no link '" + link + "'");
  }
  return it->second;
}

const RoutingAgent& Network::agent(const std::string& node_name) const {
  auto it = nodes_.find(node_name);
  if (it == nodes_.end()) throw Error(Errc::InvalidArgument, "unknown node '" + node_name + "'");
  return it->second.agent;
}

bool Network::link_up(const std::string& link) const { return link_state(link).runtime.status().up(); }

std::uint64_t Network::link_level(const std::string& link) const {
  const LinkSpec& l = topology_.link(link);
  return std::min(endpoint(l.a, link).level(), endpoint(l.b, link).level());
}

double Network::rto() const { return 2.0 * (config_.latency_s + config_.jitter_s) + 0.01; }

// ---------------------------------------------------------------------------
// Classical channel

void Network::transmit(Envelope env) {
  LinkState& ls = link_state(env.link);
  const LinkSpec& spec = topology_.link(env.link);
  const int dir = env.from == spec.a ? 0 : 1;
  env.epoch = ls.epoch;
  ++counters_.messages_sent;

  auto drop = ls.drop_next.find(env.msg.channel);
  if (drop != ls.drop_next.end() && drop->second > 0) {
    --drop->second;
    ++counters_.messages_lost;
    return;
  }
  auto lp = config_.link_loss.find(env.link);
  const double p = lp != config_.link_loss.end() ? lp->second : config_.loss_prob;
  if (p > 0.0 && ls.rng.uniform01() < p) {
    ++counters_.messages_lost;
    return;
  }
  auto corrupt = ls.corrupt_next.find(env.msg.channel);
  if (corrupt != ls.corrupt_next.end() && corrupt->second > 0) {
    --corrupt->second;
    ++counters_.messages_corrupted;
    Bytes& target = env.msg.payload;
    if (!target.empty()) {
      const std::uint64_t bit = ls.rng.next_u64() % (target.size() * 8);
      target[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    } else {
      env.msg.tag[0] ^= 0x01;
    }
  }

  double delay = config_.latency_s;
  if (config_.jitter_s > 0.0) delay += ls.rng.uniform01() * config_.jitter_s;
  const double at = std::max(queue_.now() + delay, ls.last_arrival[dir]);
  ls.last_arrival[dir] = at;
  ++in_flight_;
  queue_.schedule(at, [this, env = std::move(env)]() mutable { arrive(std::move(env)); });
}

void Network::arrive(Envelope env) {
  --in_flight_;
  LinkState& ls = link_state(env.link);
  if (ls.epoch != env.epoch || !ls.runtime.status().up()) {
    ++counters_.messages_dropped_down;
    return;
  }
  const double now = queue_.now();
  Q3PEndpoint& ep = endpoint(env.to, env.link);
  try {
    switch (env.msg.channel) {
      case Channel::Routing: {
        Bytes payload = ep.open(env.msg, now);
        Lsa lsa = decode_lsa(payload, topology_);
        ByteWriter ack;
        ack.put_u8(kLsaAckType);
        ack.put_u16(static_cast<std::uint16_t>(lsa.link.size()));
        ack.put_bytes(ByteView(reinterpret_cast<const std::uint8_t*>(lsa.link.data()), lsa.link.size()));
        ack.put_u8(lsa.origin == topology_.link(lsa.link).b ? 1 : 0);
        ack.put_u64(lsa.seq);
        send_control(env.to, env.link, ack.bytes());
        if (node(env.to).agent.receive(lsa, env.link)) flush_lsas(env.to);
        break;
      }
      case Channel::Distill:
        ep.open(env.msg, now);
        break;
      case Channel::Control: {
        Bytes payload = ep.open(env.msg, now);
        ByteReader r(payload);
        const std::uint8_t type = r.get_u8();
        if (type == kAckType) {
          const std::uint64_t req = r.get_u64();
          const std::uint32_t seq = r.get_u32();
          on_ack(env.to, env.link, {req, seq});
        } else if (type == kLsaAckType) {
          const std::uint16_t n = r.get_u16();
          const ByteView id = r.get_bytes(n);
          const std::string link(id.begin(), id.end());
          const LinkSpec& spec = topology_.link(link);
          const std::string& origin = r.get_u8() ? spec.b : spec.a;
          on_lsa_ack(env.to, env.link, {link, origin}, r.get_u64());
        }
        break;
      }
      case Channel::Transport: {
        TransportSegment seg = open_segment(ep, env.msg, now);
        on_segment(env.to, env.link, seg, env);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() == Errc::TagMismatch) {
      ++counters_.tag_failures;
    } else if (e.code() == Errc::ReplayDetected) {
      ++counters_.replays;
    } else {
      throw;
    }
  }
}

void Network::send_control(const std::string& node_name, const std::string& link, const Bytes& payload) {
  Q3PEndpoint& ep = endpoint(node_name, link);
  if (!link_up(link) || !ep.can_seal(0, kAuthOnly)) return;
  Envelope env;
  env.link = link;
  env.from = node_name;
  env.to = ep.peer();
  env.msg = ep.seal(Channel::Control, payload, kAuthOnly, queue_.now());
  transmit(std::move(env));
}

// ---------------------------------------------------------------------------
// Routing

void Network::refresh_lsas(const std::string& node_name) {
  NodeState& ns = node(node_name);
  const double now = queue_.now();
  const double quarter = config_.cost.target_level_bytes / 4.0;
  for (auto& [link, ep] : ns.endpoints) {
    const LinkRuntime& rt = link_state(link).runtime;
    const bool up = rt.status().up();
    const std::uint64_t level = ep.tx().available();
    const Lsa* last = ns.agent.last_originated(link);
    bool due = !last || last->up != up || (last->level_bytes > config_.auth_reserve) != (level > config_.auth_reserve) ||
               std::fabs(static_cast<double>(level) - static_cast<double>(last->level_bytes)) >= quarter ||
               now - last->timestamp_s >= config_.lsa_keepalive_s;
    if (due) {
      ns.agent.originate(link, up, level, rt.rate_bps(), now);
      ++counters_.lsas_originated;
    }
  }
  flush_lsas(node_name);
}

void Network::flush_lsas(const std::string& node_name) {
  NodeState& ns = node(node_name);
  if (ns.agent.pending() == 0) return;
  std::set<std::string> unreachable;
  for (const auto& [link, ep] : ns.endpoints) {
    if (!link_up(link)) unreachable.insert(link);
  }
  const double now = queue_.now();
  for (auto& out : ns.agent.flood_lsas(ns.endpoints, now, unreachable)) {
    ++counters_.lsa_messages;
    const Lsa lsa = decode_lsa(out.msg.payload, topology_);
    LsaKey key{lsa.link, lsa.origin};
    LsaWait& w = ns.lsa_wait[out.link][key];
    if (w.seq != lsa.seq) w = LsaWait{lsa.seq, 0, 0.0};
    ++w.attempts;
    w.deadline = now + rto();
    queue_.schedule(w.deadline, [this, node_name, link = out.link, key, seq = lsa.seq] {
      on_lsa_timeout(node_name, link, key, seq);
    });
    transmit(Envelope{out.link, node_name, out.to, std::move(out.msg), {}, {}, 0});
  }
}

void Network::on_lsa_ack(const std::string& node_name, const std::string& link, const LsaKey& key,
                         std::uint64_t seq) {
  auto& waits = node(node_name).lsa_wait[link];
  auto it = waits.find(key);
  if (it != waits.end() && it->second.seq <= seq) waits.erase(it);
}

void Network::on_lsa_timeout(const std::string& node_name, const std::string& link, const LsaKey& key,
                             std::uint64_t seq) {
  NodeState& ns = node(node_name);
  auto& waits = ns.lsa_wait[link];
  auto it = waits.find(key);
  if (it == waits.end() || it->second.seq != seq || queue_.now() < it->second.deadline) return;
  if (!link_up(link) || it->second.attempts > config_.max_retransmissions) {
    // A link coming back up resynchronises the whole database.
    waits.erase(it);
    return;
  }
  ++counters_.lsa_retransmissions;
  ns.agent.resend(key.first, key.second, link);
  flush_lsas(node_name);
}

void Network::start() {
  for (const auto& [name, ns] : nodes_) refresh_lsas(name);
}

// ---------------------------------------------------------------------------
// Link events

void Network::tick(double dt) {
  const double now = queue_.now();
  for (auto& [id, ls] : links_) {
    if (ls.runtime.advance_to(now)) {
      const LinkSpec& spec = topology_.link(id);
      node(spec.a).agent.sync(id);
      node(spec.b).agent.sync(id);
    }
    std::optional<KeyBlock> block = ls.runtime.produce_key(dt);
    if (!block) continue;
    const LinkSpec& spec = topology_.link(id);
    for (const std::string* end : {&spec.a, &spec.b}) endpoint(*end, id).push_key(*block);
    if (!config_.distill_auth) continue;
    ByteWriter w;
    w.put_u64(block->id);
    for (const std::string* end : {&spec.a, &spec.b}) {
      Q3PEndpoint& ep = endpoint(*end, id);
      if (!ep.can_seal(0, kAuthOnly)) continue;
      ++counters_.distill_messages;
      transmit(Envelope{id, *end, ep.peer(), ep.seal(Channel::Distill, w.bytes(), kAuthOnly, now), {}, {}, 0});
    }
  }
  for (const auto& [name, ns] : nodes_) refresh_lsas(name);
  for (auto& [name, ns] : nodes_) {
    for (auto& [link, q] : ns.outq) {
      if (!q.empty()) pump(name, link);
    }
  }
}

void Network::fail_link(const std::string& link) {
  LinkState& ls = link_state(link);
  ls.runtime.advance_to(queue_.now());
  ls.runtime.fail();
  ++ls.epoch;
  const LinkSpec& spec = topology_.link(link);
  for (const std::string* end : {&spec.a, &spec.b}) {
    refresh_lsas(*end);
    pump(*end, link);
  }
}

void Network::restore_link(const std::string& link) {
  LinkState& ls = link_state(link);
  ls.runtime.advance_to(queue_.now());
  ls.runtime.restore();
  const LinkSpec& spec = topology_.link(link);
  if (ls.runtime.status().up()) {
    for (const std::string* end : {&spec.a, &spec.b}) {
      node(*end).agent.sync(link);
      refresh_lsas(*end);
    }
  }
}

void Network::set_daytime(bool daytime) {
  for (auto& [id, ls] : links_) ls.runtime.set_daytime(daytime);
}

void Network::start_dos(const std::string& link, double bytes_per_s, double duration_s) {
  if (bytes_per_s < 0.0 || duration_s < 0.0) throw Error(Errc::InvalidArgument, "negative DoS rate or duration");
  LinkState& ls = link_state(link);
  const bool running = ls.dos_until > queue_.now() && ls.dos_rate > 0.0;
  ls.dos_rate = bytes_per_s;
  ls.dos_until = queue_.now() + duration_s;
  if (!running) queue_.schedule_in(0.1, [this, link] { dos_tick(link); });
}

void Network::dos_tick(const std::string& link) {
  LinkState& ls = link_state(link);
  const double now = queue_.now();
  if (now > ls.dos_until + 1e-9 || ls.dos_rate <= 0.0) return;
  const LinkSpec& spec = topology_.link(link);
  const std::string* ends[2] = {&spec.a, &spec.b};
  for (int d = 0; d < 2; ++d) {
    ls.dos_carry[d] += ls.dos_rate / 2.0 * 0.1;
    Q3PEndpoint& ep = endpoint(*ends[d], link);
    while (ls.dos_carry[d] >= static_cast<double>(kAuthKeyBytes) && ls.runtime.status().up() &&
           ep.can_seal(0, kAuthOnly)) {
      ls.dos_carry[d] -= static_cast<double>(kAuthKeyBytes);
      ++counters_.spam_messages;
      transmit(Envelope{link, *ends[d], ep.peer(), ep.seal(Channel::Control, Bytes{kSpamType}, kAuthOnly, now), {}, {},
                        0});
    }
    ls.dos_carry[d] = std::min(ls.dos_carry[d], static_cast<double>(kAuthKeyBytes));
  }
  if (now + 0.1 <= ls.dos_until + 1e-9) queue_.schedule_in(0.1, [this, link] { dos_tick(link); });
}

void Network::inject_loss(const std::string& link, std::uint64_t count, Channel channel) {
  link_state(link).drop_next[channel] += count;
}

void Network::inject_corruption(const std::string& link, std::uint64_t count, Channel channel) {
  link_state(link).corrupt_next[channel] += count;
}

// ---------------------------------------------------------------------------
// Transport

std::uint64_t Network::submit(KeyDeliveryRequest request) {
  request.check();
  node(request.src);
  node(request.dst);
  for (const auto& l : request.excluded_links) link_state(l);
  if (request.id == 0) request.id = next_request_id_;
  if (records_.count(request.id)) {
    throw Error(Errc::InvalidArgument, "duplicate request id " + std::to_string(request.id));
  }
  if (request.id < kRefillRequestBase) next_request_id_ = std::max(next_request_id_, request.id + 1);
  const double now = queue_.now();

  DeliveryRecord& rec = records_[request.id];
  rec.request_id = request.id;
  rec.src = request.src;
  rec.dst = request.dst;
  rec.n_bytes = request.n_bytes;
  rec.submitted_s = now;
  Rng secret_rng(derive_seed(config_.seed, "secret:" + std::to_string(request.id)));
  rec.secret_at_src = secret_rng.bytes(request.n_bytes);

  const std::vector<std::uint64_t> sizes = fragment_sizes(request.n_bytes, config_.mtu);
  rec.segments = static_cast<std::uint32_t>(sizes.size());
  RequestState& rs = requests_[request.id];
  rs.request = request;
  rs.segs.assign(sizes.size(), SegState::Pending);

  const RoutingAgent& src_agent = node(request.src).agent;
  RouteConstraints constraints;
  constraints.excluded_links = request.excluded_links;
  std::vector<Path> paths =
      disjoint_paths(topology_, src_agent.db(), request.src, request.dst, request.multipath, config_.cost, constraints);
  if (paths.empty()) {
    for (std::uint32_t s = 0; s < rec.segments; ++s) rs.segs[s] = SegState::Failed;
    rec.failed_segments = rec.segments;
    rec.failure = Errc::NoRoute;
    rec.status = DeliveryStatus::Failed;
    return request.id;
  }
  rec.paths_used = paths;

  const SharedSegments shared = shared_segments(topology_, request.src, request.dst);
  std::vector<std::uint64_t> weights;
  for (const Path& p : paths) weights.push_back(bottleneck_level(p, src_agent.db(), topology_, shared));
  const std::vector<std::uint64_t> counts = proportional_split(sizes.size(), weights);

  std::uint32_t seq = 0;
  std::uint64_t offset = 0;
  std::set<std::string> touched;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::uint64_t c = 0; c < counts[i]; ++c, ++seq) {
      Job job;
      job.request = request.id;
      job.seq = seq;
      job.total = rec.segments;
      job.fragment.assign(rec.secret_at_src.begin() + static_cast<std::ptrdiff_t>(offset),
                          rec.secret_at_src.begin() + static_cast<std::ptrdiff_t>(offset + sizes[seq]));
      offset += sizes[seq];
      job.path = paths[i].nodes;
      job.links = paths[i].links;
      touched.insert(job.links.front());
      node(request.src).outq[job.links.front()].push_back(std::move(job));
    }
  }
  for (const auto& link : touched) pump(request.src, link);
  return request.id;
}

DeliveryRecord Network::deliver_key(KeyDeliveryRequest request, double horizon_s) {
  const std::uint64_t id = submit(std::move(request));
  const DeliveryRecord& rec = records_.at(id);
  if (rec.failure == Errc::NoRoute && rec.paths_used.empty()) {
    throw Error(Errc::NoRoute, "no route for request " + std::to_string(id));
  }
  const double horizon = queue_.now() + horizon_s;
  queue_.run_while_pending([&] { return rec.finished(); }, horizon);
  return rec;
}

std::uint64_t Network::restore_preshared(const std::string& link, std::uint64_t n_bytes) {
  const LinkSpec& spec = topology_.link(link);
  KeyDeliveryRequest req;
  req.src = spec.a;
  req.dst = spec.b;
  req.n_bytes = n_bytes;
  req.multipath = 3;
  req.excluded_links = {link};
  req.id = kRefillRequestBase + next_refill_id_++;
  const std::uint64_t id = submit(req);
  const DeliveryRecord& rec = records_.at(id);
  if (rec.failure == Errc::NoRoute && rec.paths_used.empty()) {
    throw Error(Errc::NoRoute, "link '" + link + "' has no alternate route between its endpoints");
  }
  requests_.at(id).refill_link = link;
  if (rec.finished()) finalize(id);
  return id;
}

const DeliveryRecord& Network::record(std::uint64_t id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(Errc::InvalidArgument, "unknown request " + std::to_string(id));
  return it->second;
}

bool Network::all_requests_finished() const {
  return std::all_of(records_.begin(), records_.end(), [](const auto& kv) { return kv.second.finished(); });
}

void Network::pump(const std::string& node_name, const std::string& link) {
  NodeState& ns = node(node_name);
  auto& q = ns.outq[link];
  auto& flying = ns.inflight[link];
  const double now = queue_.now();
  while (!q.empty() && flying.size() < config_.window) {
    Job job = std::move(q.front());
    q.pop_front();
    if (requests_.at(job.request).segs[job.seq] != SegState::Pending) continue;
    if (!link_up(link)) {
      reroute(node_name, std::move(job), link);
      continue;
    }
    Q3PEndpoint& ep = endpoint(node_name, link);
    const std::uint64_t floor = 2 * config_.auth_reserve;
    if (ep.tx().available() < floor || !ep.can_seal(job.fragment.size(), {true, true})) {
      // Key-availability back-off: try a different route, else wait for
      // production to refill the store.
      const RoutingAgent& a = ns.agent;
      RouteConstraints c;
      c.excluded_links = requests_.at(job.request).request.excluded_links;
      c.excluded_links.insert(job.avoid.begin(), job.avoid.end());
      c.excluded_links.insert(link);
      bool alternative = false;
      try {
        shortest_path(topology_, a.db(), node_name, job.path.back(), config_.cost, c);
        alternative = true;
      } catch (const Error& e) {
        if (e.code() != Errc::NoRoute) throw;
      }
      if (alternative) {
        reroute(node_name, std::move(job), link);
        continue;
      }
      const auto& deadline = requests_.at(job.request).request.deadline_s;
      if (job.backoffs >= config_.max_backoffs || (deadline && now + config_.backoff_s > *deadline)) {
        resolve(job.request, job.seq, SegState::Failed, Errc::KeyExhausted);
        continue;
      }
      ++job.backoffs;
      q.push_front(std::move(job));
      queue_.schedule_in(config_.backoff_s, [this, node_name, link] { pump(node_name, link); });
      return;
    }

    TransportSegment seg{job.request, job.seq, job.total, job.fragment, {}};
    Envelope env;
    env.link = link;
    env.from = node_name;
    env.to = ep.peer();
    env.msg = seal_segment(ep, seg, now);
    env.path.assign(job.path.begin() + 1, job.path.end());
    env.links.assign(job.links.begin() + 1, job.links.end());

    DeliveryRecord& rec = records_.at(job.request);
    rec.consumption[link] += job.fragment.size() + kHopOverheadBytes;
    ++rec.transmissions;
    if (job.attempts > 0) ++rec.retransmissions;
    hops_.push_back({now, link, node_name, env.to, job.request, job.seq, job.attempts});

    const SegKey key{job.request, job.seq};
    const std::uint64_t token = next_token_++;
    flying[key] = InFlight{std::move(job), token};
    queue_.schedule_in(rto(), [this, node_name, link, key, token] { on_timeout(node_name, link, key, token); });
    transmit(std::move(env));
  }
}

void Network::reroute(const std::string& node_name, Job job, const std::string& bad_link) {
  job.avoid.insert(bad_link);
  RequestState& rs = requests_.at(job.request);
  RouteConstraints c;
  c.excluded_links = rs.request.excluded_links;
  c.excluded_links.insert(job.avoid.begin(), job.avoid.end());
  Path p;
  try {
    p = shortest_path(topology_, node(node_name).agent.db(), node_name, job.path.back(), config_.cost, c);
  } catch (const Error& e) {
    if (e.code() != Errc::NoRoute) throw;
    resolve(job.request, job.seq, SegState::Failed, Errc::NoRoute);
    return;
  }
  DeliveryRecord& rec = records_.at(job.request);
  ++rec.reroutes;
  // Record the full source-to-destination route the segment now follows.
  Path full = p;
  if (node_name != rec.src) {
    // Prepend the prefix the segment already travelled.
    for (const Path& used : rec.paths_used) {
      auto pos = std::find(used.nodes.begin(), used.nodes.end(), node_name);
      if (pos == used.nodes.end() || used.nodes.front() != rec.src) continue;
      const auto idx = static_cast<std::size_t>(pos - used.nodes.begin());
      full.nodes.assign(used.nodes.begin(), pos);
      full.nodes.insert(full.nodes.end(), p.nodes.begin(), p.nodes.end());
      full.links.assign(used.links.begin(), used.links.begin() + static_cast<std::ptrdiff_t>(idx));
      full.links.insert(full.links.end(), p.links.begin(), p.links.end());
      break;
    }
  }
  if (std::find(rec.paths_used.begin(), rec.paths_used.end(), full) == rec.paths_used.end()) {
    rec.paths_used.push_back(full);
  }
  job.path = p.nodes;
  job.links = p.links;
  job.attempts = 0;
  const std::string next_link = job.links.front();
  node(node_name).outq[next_link].push_back(std::move(job));
  queue_.schedule(queue_.now(), [this, node_name, next_link] { pump(node_name, next_link); });
}

void Network::on_segment(const std::string& node_name, const std::string& link, const TransportSegment& seg,
                         const Envelope& env) {
  ByteWriter ack;
  ack.put_u8(kAckType);
  ack.put_u64(seg.request_id);
  ack.put_u32(seg.seq);
  ++counters_.acks;
  send_control(node_name, link, ack.bytes());

  NodeState& ns = node(node_name);
  const SegKey key{seg.request_id, seg.seq};
  if (!ns.seen.insert(key).second) return;
  auto rit = requests_.find(seg.request_id);
  if (rit == requests_.end() || seg.seq >= rit->second.segs.size()) return;

  if (env.path.size() <= 1) {
    rit->second.received[seg.seq] = seg.fragment;
    resolve(seg.request_id, seg.seq, SegState::Delivered);
    return;
  }
  exposures_.push_back({queue_.now(), node_name, seg.request_id, seg.seq, seg.fragment.size()});
  Job job;
  job.request = seg.request_id;
  job.seq = seg.seq;
  job.total = seg.total;
  job.fragment = seg.fragment;
  job.path = env.path;
  job.links = env.links;
  const std::string next_link = job.links.front();
  ns.outq[next_link].push_back(std::move(job));
  pump(node_name, next_link);
}

void Network::on_ack(const std::string& node_name, const std::string& link, SegKey key) {
  auto& flying = node(node_name).inflight[link];
  if (flying.erase(key) == 0) return;
  pump(node_name, link);
}

void Network::on_timeout(const std::string& node_name, const std::string& link, SegKey key, std::uint64_t token) {
  auto& flying = node(node_name).inflight[link];
  auto it = flying.find(key);
  if (it == flying.end() || it->second.token != token) return;
  Job job = std::move(it->second.job);
  flying.erase(it);
  ++job.attempts;
  if (job.attempts > config_.max_retransmissions) {
    resolve(job.request, job.seq, SegState::Failed, Errc::RetryLimitExceeded);
  } else {
    node(node_name).outq[link].push_front(std::move(job));
  }
  pump(node_name, link);
}

void Network::resolve(std::uint64_t request, std::uint32_t seq, SegState state, std::optional<Errc> failure) {
  RequestState& rs = requests_.at(request);
  DeliveryRecord& rec = records_.at(request);
  SegState& cur = rs.segs[seq];
  if (cur == state || cur == SegState::Delivered) return;
  if (cur == SegState::Failed) --rec.failed_segments;  // a late arrival beats an earlier give-up
  cur = state;
  if (state == SegState::Delivered) {
    ++rec.delivered_segments;
  } else {
    ++rec.failed_segments;
    if (!rec.failure) rec.failure = failure;
  }
  if (rec.finished()) finalize(request);
}

void Network::finalize(std::uint64_t request) {
  RequestState& rs = requests_.at(request);
  DeliveryRecord& rec = records_.at(request);
  rec.secret_at_dst.clear();
  for (const auto& [seq, frag] : rs.received) rec.secret_at_dst.insert(rec.secret_at_dst.end(), frag.begin(), frag.end());
  if (rec.delivered_segments == rec.segments) {
    rec.status = DeliveryStatus::Delivered;
    rec.failure.reset();
  } else {
    rec.status = rec.delivered_segments == 0 ? DeliveryStatus::Failed : DeliveryStatus::Partial;
  }
  rec.completion_s = queue_.now();

  if (rs.refill_link && !rs.refilled && rec.status == DeliveryStatus::Delivered) {
    rs.refilled = true;
    const std::string& link = *rs.refill_link;
    LinkState& ls = link_state(link);
    const LinkSpec& spec = topology_.link(link);
    const std::uint64_t block_id = ls.runtime.allocate_block_id();
    endpoint(spec.a, link).push_key({block_id, rec.secret_at_src, link});
    endpoint(spec.b, link).push_key({block_id, rec.secret_at_dst, link});
    ls.refilled += rec.n_bytes;
    refills_.push_back({queue_.now(), link, request, rec.n_bytes, endpoint(spec.a, link).level(),
                        endpoint(spec.b, link).level(), rec.secret_at_src == rec.secret_at_dst});
    refresh_lsas(spec.a);
    refresh_lsas(spec.b);
  }
}

// ---------------------------------------------------------------------------
// Audits

bool Network::ledgers_exclusive() const {
  for (const auto& [name, ns] : nodes_) {
    for (const auto& [link, ep] : ns.endpoints) {
      if (!ep.tx().ledger().exclusive() || !ep.rx().ledger().exclusive()) return false;
    }
  }
  return true;
}

bool Network::accounting_exact() const {
  for (const auto& [name, ns] : nodes_) {
    for (const auto& [link, ep] : ns.endpoints) {
      for (const KeyStore* s : {&ep.tx(), &ep.rx()}) {
        if (s->initial_bytes() + s->pushed_bytes() != s->available() + s->ledger().total_bytes()) return false;
      }
      const LinkState& ls = link_state(link);
      if (ep.tx().pushed_bytes() + ep.rx().pushed_bytes() != ls.runtime.produced_bytes() + ls.refilled) return false;
    }
  }
  return true;
}

}  // namespace qkdnet
