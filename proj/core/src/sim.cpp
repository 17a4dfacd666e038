#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/sim.hpp"

namespace qkdnet {

Engine::Engine(const Topology& topology, const Scenario& scenario, std::uint64_t seed)
    : topology_(topology), scenario_(scenario), seed_(seed) {
  topology_.validate();
  scenario_.validate(topology_);
  NetworkConfig cfg;
  cfg.seed = seed;
  cfg.mode = scenario_.mode;
  cfg.jitter_s = scenario_.jitter_s;
  cfg.loss_prob = scenario_.loss_prob;
  cfg.link_loss = scenario_.link_loss;
  network_ = std::make_unique<Network>(topology_, cfg);
  report_.scenario = scenario_.name;
  report_.seed = seed;
  report_.duration_s = scenario_.duration_s;

  EventQueue& q = network_->queue();
  network_->start();
  sample();
  const auto ticks = static_cast<std::uint64_t>(std::floor(scenario_.duration_s / kTickSeconds + 1e-9));
  for (std::uint64_t k = 1; k <= ticks; ++k) {
    q.schedule(static_cast<double>(k) * kTickSeconds, [this] { network_->tick(kTickSeconds); });
  }
  const auto samples = static_cast<std::uint64_t>(std::floor(scenario_.duration_s / scenario_.sample_period_s + 1e-9));
  for (std::uint64_t k = 1; k <= samples; ++k) {
    q.schedule(static_cast<double>(k) * scenario_.sample_period_s, [this] { sample(); });
  }
  for (const Event& e : scenario_.events) q.schedule(e.time_s, [this, e] { apply(e); });
}

void Engine::inject(const Event& event) {
  Scenario probe = scenario_;
  probe.events = {event};
  probe.duration_s = std::max(scenario_.duration_s, event.time_s);
  probe.validate(topology_);
  network_->queue().schedule(event.time_s, [this, event] { apply(event); });
}

void Engine::apply(const Event& e) {
  Network& net = *network_;
  switch (e.kind) {
    case EventKind::LinkFail:
      net.fail_link(e.link);
      break;
    case EventKind::LinkRestore:
      net.restore_link(e.link);
      break;
    case EventKind::DosDrain:
      net.start_dos(e.link, e.rate_bytes_per_s, e.duration_s);
      break;
    case EventKind::KeyRequest:
      net.submit(*e.request);
      break;
    case EventKind::DayWindow:
      net.set_daytime(true);
      net.queue().schedule(e.end_s, [this] { network_->set_daytime(false); });
      break;
    case EventKind::RestorePreshared:
      try {
        net.restore_preshared(e.link, e.bytes);
      } catch (const Error& err) {
        if (err.code() != Errc::NoRoute) throw;
        report_.event_errors.push_back("t=" + format_double(e.time_s) + " restore_preshared " + e.link + ": " +
                                       err.what());
      }
      break;
    case EventKind::Corrupt:
      net.inject_corruption(e.link, e.count, e.channel);
      break;
    case EventKind::ProduceTick:
      net.tick(kTickSeconds);
      break;
    case EventKind::MsgArrive:
      break;
  }
}

void Engine::sample() {
  Network& net = *network_;
  const double now = net.now();
  for (const auto& [id, l] : topology_.links()) {
    report_.samples.push_back({now, id, net.link_level(id), net.runtime(id).rate_bps()});
    std::size_t observers = 0;
    for (const auto& [name, n] : topology_.nodes()) {
      const LinkStateDB& db = net.agent(name).db();
      if (db.find(id, l.a) && db.find(id, l.b) && !db.usable(l, topology_)) ++observers;
    }
    if (observers > 0) report_.unusable.push_back({now, id, observers});
  }
  if (!net.accounting_exact()) ++report_.conservation_violations;
}

void Engine::run_until(double t) { network_->queue().run_until(t); }

MetricsReport Engine::finish() {
  run_until(scenario_.duration_s);
  Network& net = *network_;
  MetricsReport out = report_;
  for (const auto& [id, rec] : net.records()) {
    DeliveryRecord r = rec;
    if (!r.finished()) r.status = r.delivered_segments == 0 ? DeliveryStatus::Failed : DeliveryStatus::Partial;
    if (r.status == DeliveryStatus::Delivered) {
      out.delivered_bps[r.src + ">" + r.dst] += static_cast<double>(r.n_bytes) * 8.0 / scenario_.duration_s;
    }
    out.records.push_back(std::move(r));
  }
  out.exposures = net.exposures();
  out.hops = net.hops();
  out.refills = net.refills();
  out.counters = net.counters();
  out.ledgers_exclusive = net.ledgers_exclusive();
  for (const auto& [id, l] : topology_.links()) {
    LinkSummary s;
    s.produced_bytes = net.runtime(id).produced_bytes();
    for (const auto& rf : out.refills) {
      if (rf.link == id) s.refilled_bytes += rf.bytes;
    }
    for (const std::string* end : {&l.a, &l.b}) {
      const Q3PEndpoint& ep = net.endpoint(*end, id);
      s.ledgered_bytes += ep.tx().ledger().total_bytes() + ep.rx().ledger().total_bytes();
      s.transport_bytes += ep.tx().ledger().bytes_for(Channel::Transport);
    }
    s.level_a = net.endpoint(l.a, id).level();
    s.level_b = net.endpoint(l.b, id).level();
    out.links[id] = s;
  }
  return out;
}

MetricsReport run(const Topology& topology, const Scenario& scenario, std::uint64_t seed) {
  Engine engine(topology, scenario, seed);
  return engine.finish();
}

std::string samples_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "time_s,link_id,level_bytes,rate_bps\n";
  for (const auto& s : report.samples) {
    out << format_double(s.time_s) << ',' << s.link << ',' << s.level_bytes << ',' << format_double(s.rate_bps)
        << '\n';
  }
  return out.str();
}

std::string audit_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "time_s,node,request_id,seq,bytes\n";
  for (const auto& e : report.exposures) {
    out << format_double(e.time_s) << ',' << e.node << ',' << e.request_id << ',' << e.seq << ',' << e.bytes << '\n';
  }
  return out.str();
}

std::string hops_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "time_s,link,from,to,request_id,seq,attempt\n";
  for (const auto& h : report.hops) {
    out << format_double(h.time_s) << ',' << h.link << ',' << h.from << ',' << h.to << ',' << h.request_id << ','
        << h.seq << ',' << h.attempt << '\n';
  }
  return out.str();
}

namespace {

std::string digest(const Bytes& b) {
  ByteWriter w;
  w.put_u64(fnv1a64(ByteView(b)));
  return to_hex(w.bytes());
}

}  // namespace

std::string summary_json(const MetricsReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = report.scenario;
  j["seed"] = report.seed;
  j["duration_s"] = report.duration_s;
  ordered_json recs = ordered_json::array();
  for (const auto& r : report.records) {
    ordered_json x;
    x["request_id"] = r.request_id;
    x["src"] = r.src;
    x["dst"] = r.dst;
    x["n_bytes"] = r.n_bytes;
    x["status"] = to_string(r.status);
    x["failure"] = r.failure ? ordered_json(to_string(*r.failure)) : ordered_json(nullptr);
    x["submitted_s"] = r.submitted_s;
    x["completion_s"] = r.completion_s ? ordered_json(*r.completion_s) : ordered_json(nullptr);
    x["segments"] = r.segments;
    x["delivered_segments"] = r.delivered_segments;
    x["failed_segments"] = r.failed_segments;
    x["transmissions"] = r.transmissions;
    x["retransmissions"] = r.retransmissions;
    x["reroutes"] = r.reroutes;
    x["secret_digest_src"] = digest(r.secret_at_src);
    x["secret_digest_dst"] = digest(r.secret_at_dst);
    x["secrets_equal"] = r.secret_at_src == r.secret_at_dst;
    ordered_json paths = ordered_json::array();
    for (const auto& p : r.paths_used) paths.push_back(describe(p));
    x["paths"] = paths;
    ordered_json cons = ordered_json::object();
    for (const auto& [link, bytes] : r.consumption) cons[link] = bytes;
    x["consumption"] = cons;
    recs.push_back(x);
  }
  j["requests"] = recs;
  ordered_json rates = ordered_json::object();
  for (const auto& [pair, bps] : report.delivered_bps) rates[pair] = bps;
  j["delivered_bps"] = rates;
  ordered_json links = ordered_json::object();
  for (const auto& [id, s] : report.links) {
    links[id] = {{"produced_bytes", s.produced_bytes}, {"refilled_bytes", s.refilled_bytes},
                 {"ledgered_bytes", s.ledgered_bytes}, {"transport_bytes", s.transport_bytes},
                 {"level_a", s.level_a},               {"level_b", s.level_b}};
  }
  j["links"] = links;
  ordered_json refills = ordered_json::array();
  for (const auto& r : report.refills) {
    refills.push_back({{"time_s", r.time_s}, {"link", r.link}, {"request_id", r.request_id}, {"bytes", r.bytes},
                       {"level_a", r.level_a}, {"level_b", r.level_b}, {"identical", r.identical}});
  }
  j["refills"] = refills;
  std::map<std::string, double> first_unusable;
  for (const auto& u : report.unusable) first_unusable.emplace(u.link, u.time_s);
  ordered_json unusable = ordered_json::object();
  for (const auto& [link, t] : first_unusable) unusable[link] = t;
  j["first_marked_unusable_s"] = unusable;
  j["event_errors"] = report.event_errors;
  const NetworkCounters& c = report.counters;
  j["counters"] = {{"messages_sent", c.messages_sent},
                   {"messages_lost", c.messages_lost},
                   {"messages_dropped_down", c.messages_dropped_down},
                   {"messages_corrupted", c.messages_corrupted},
                   {"tag_failures", c.tag_failures},
                   {"replays", c.replays},
                   {"lsas_originated", c.lsas_originated},
                   {"lsa_messages", c.lsa_messages},
                   {"acks", c.acks},
                   {"distill_messages", c.distill_messages},
                   {"spam_messages", c.spam_messages}};
  j["plaintext_exposures"] = report.exposures.size();
  j["conservation_violations"] = report.conservation_violations;
  j["ledgers_exclusive"] = report.ledgers_exclusive;
  return j.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.csv", samples_csv(report));
  write_file(dir / "summary.json", summary_json(report));
  write_file(dir / "audit.csv", audit_csv(report));
  write_file(dir / "hops.csv", hops_csv(report));
}

}  // namespace qkdnet
