#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qkdnet/config_text.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/routing.hpp"
#include "qkdnet/sim.hpp"

namespace qkdnet {

const char* to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::ProduceTick: return "tick";
    case EventKind::MsgArrive: return "arrive";
    case EventKind::LinkFail: return "fail";
    case EventKind::LinkRestore: return "restore";
    case EventKind::DosDrain: return "dos";
    case EventKind::KeyRequest: return "request";
    case EventKind::DayWindow: return "day";
    case EventKind::RestorePreshared: return "restore_preshared";
    case EventKind::Corrupt: return "corrupt";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::ScenarioError, what); }

EventKind parse_kind(const std::string& s, int line) {
  for (EventKind k : {EventKind::LinkFail, EventKind::LinkRestore, EventKind::DosDrain, EventKind::KeyRequest,
                      EventKind::DayWindow, EventKind::RestorePreshared, EventKind::Corrupt}) {
    if (s == to_string(k)) return k;
  }
  throw Error(Errc::ParseError, "unknown event kind '" + s + "' (line " + std::to_string(line) + ")");
}

Channel parse_channel(const std::string& s) {
  for (int i = 0; i < kChannelCount; ++i) {
    if (s == to_string(static_cast<Channel>(i))) return static_cast<Channel>(i);
  }
  throw Error(Errc::ParseError, "unknown channel '" + s + "'");
}

std::set<std::string> split_list(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

std::string join_list(const std::set<std::string>& items) {
  std::string out;
  for (const auto& i : items) {
    if (!out.empty()) out += ',';
    out += i;
  }
  return out;
}

void check_link(const Topology& topo, const std::string& link, const std::string& where) {
  if (!topo.find_link(link)) bad(where + ": unknown link '" + link + "'");
}

void check_node(const Topology& topo, const std::string& node, const std::string& where) {
  if (!topo.find_node(node)) bad(where + ": unknown node '" + node + "'");
}

}  // namespace

void Scenario::validate(const Topology& topology) const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) bad("duration must be positive");
  if (!(sample_period_s > 0.0)) bad("sample period must be positive");
  if (jitter_s < 0.0) bad("jitter must be non-negative");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) bad("loss probability outside [0, 1]");
  for (const auto& [link, p] : link_loss) {
    check_link(topology, link, "[loss]");
    if (!(p >= 0.0 && p <= 1.0)) bad("loss probability for '" + link + "' outside [0, 1]");
  }
  std::set<std::uint64_t> ids;
  for (const Event& e : events) {
    const std::string where = std::string("event ") + to_string(e.kind) + " at t=" + format_double(e.time_s);
    if (!(e.time_s >= 0.0 && e.time_s <= duration_s)) bad(where + ": time outside [0, duration]");
    switch (e.kind) {
      case EventKind::ProduceTick:
      case EventKind::MsgArrive:
        bad(where + ": internal event kind");
      case EventKind::LinkFail:
      case EventKind::LinkRestore:
        check_link(topology, e.link, where);
        break;
      case EventKind::DosDrain:
        check_link(topology, e.link, where);
        if (!(e.rate_bytes_per_s > 0.0) || !(e.duration_s > 0.0)) bad(where + ": rate and duration must be positive");
        break;
      case EventKind::KeyRequest: {
        if (!e.request) bad(where + ": missing request");
        const KeyDeliveryRequest& r = *e.request;
        check_node(topology, r.src, where);
        check_node(topology, r.dst, where);
        for (const auto& l : r.excluded_links) check_link(topology, l, where);
        if (r.n_bytes == 0 || r.multipath == 0 || r.src == r.dst) bad(where + ": malformed request");
        if (r.id != 0 && !ids.insert(r.id).second) bad(where + ": duplicate request id " + std::to_string(r.id));
        break;
      }
      case EventKind::DayWindow:
        if (!(e.start_s <= e.end_s) || e.start_s < 0.0) bad(where + ": day window must satisfy 0 <= start <= end");
        break;
      case EventKind::RestorePreshared:
        check_link(topology, e.link, where);
        if (e.bytes == 0) bad(where + ": zero restore size");
        break;
      case EventKind::Corrupt:
        check_link(topology, e.link, where);
        if (e.count == 0) bad(where + ": zero corruption count");
        break;
    }
  }
}

Scenario load_scenario(std::string_view text) {
  Scenario sc;
  bool header = false;
  for (const ConfigSection& s : parse_config_text(text)) {
    if (s.name == "scenario") {
      if (header) throw Error(Errc::ParseError, "second [scenario] section (line " + std::to_string(s.line) + ")");
      header = true;
      sc.name = s.get("name").value_or("");
      sc.duration_s = s.require_double("duration");
      sc.seed = s.get_u64("seed", 0);
      sc.jitter_s = s.get_double("jitter_ms", 0.0) / 1000.0;
      sc.loss_prob = s.get_double("loss", 0.0);
      sc.sample_period_s = s.get_double("sample", 1.0);
      const std::string mode = s.get("mode").value_or("deterministic");
      if (mode == "deterministic") {
        sc.mode = ProductionMode::Deterministic;
      } else if (mode == "poisson") {
        sc.mode = ProductionMode::Poisson;
      } else {
        throw Error(Errc::ParseError, "unknown production mode '" + mode + "'");
      }
    } else if (s.name == "loss") {
      sc.link_loss[s.require("link")] = s.require_double("p");
    } else if (s.name == "event") {
      Event e;
      e.kind = parse_kind(s.require("kind"), s.line);
      switch (e.kind) {
        case EventKind::LinkFail:
        case EventKind::LinkRestore:
          e.link = s.require("link");
          break;
        case EventKind::DosDrain:
          e.link = s.require("link");
          e.rate_bytes_per_s = s.require_double("rate");
          e.duration_s = s.require_double("duration");
          break;
        case EventKind::KeyRequest: {
          KeyDeliveryRequest r;
          r.id = s.get_u64("id", 0);
          r.src = s.require("src");
          r.dst = s.require("dst");
          r.n_bytes = s.require_u64("bytes");
          r.multipath = s.get_u64("k", 1);
          if (auto d = s.get("deadline")) r.deadline_s = parse_double(*d, "deadline");
          if (auto x = s.get("exclude")) r.excluded_links = split_list(*x);
          e.request = std::move(r);
          break;
        }
        case EventKind::DayWindow:
          e.start_s = s.require_double("start");
          e.end_s = s.require_double("end");
          break;
        case EventKind::RestorePreshared:
          e.link = s.require("link");
          e.bytes = s.require_u64("bytes");
          break;
        case EventKind::Corrupt:
          e.link = s.require("link");
          e.count = s.get_u64("count", 1);
          if (auto ch = s.get("channel")) e.channel = parse_channel(*ch);
          break;
        default:
          break;
      }
      e.time_s = e.kind == EventKind::DayWindow ? s.get_double("t", e.start_s) : s.require_double("t");
      sc.events.push_back(std::move(e));
    } else {
      throw Error(Errc::ParseError, "unknown section [" + s.name + "] (line " + std::to_string(s.line) + ")");
    }
  }
  if (!header) throw Error(Errc::ParseError, "missing [scenario] section");
  return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ScenarioError, "cannot open scenario file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Scenario sc = load_scenario(ss.str());
  if (sc.name.empty()) sc.name = path.stem().string();
  return sc;
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  out << "[scenario]";
  if (!sc.name.empty()) out << " name=" << sc.name;
  out << " duration=" << format_double(sc.duration_s) << " seed=" << sc.seed
      << " jitter_ms=" << format_double(sc.jitter_s * 1000.0) << " loss=" << format_double(sc.loss_prob)
      << " mode=" << (sc.mode == ProductionMode::Poisson ? "poisson" : "deterministic")
      << " sample=" << format_double(sc.sample_period_s) << "\n";
  for (const auto& [link, p] : sc.link_loss) out << "[loss] link=" << link << " p=" << format_double(p) << "\n";
  for (const Event& e : sc.events) {
    out << "[event] t=" << format_double(e.time_s) << " kind=" << to_string(e.kind);
    switch (e.kind) {
      case EventKind::LinkFail:
      case EventKind::LinkRestore:
        out << " link=" << e.link;
        break;
      case EventKind::DosDrain:
        out << " link=" << e.link << " rate=" << format_double(e.rate_bytes_per_s)
            << " duration=" << format_double(e.duration_s);
        break;
      case EventKind::KeyRequest: {
        const KeyDeliveryRequest& r = *e.request;
        if (r.id) out << " id=" << r.id;
        out << " src=" << r.src << " dst=" << r.dst << " bytes=" << r.n_bytes << " k=" << r.multipath;
        if (r.deadline_s) out << " deadline=" << format_double(*r.deadline_s);
        if (!r.excluded_links.empty()) out << " exclude=" << join_list(r.excluded_links);
        break;
      }
      case EventKind::DayWindow:
        out << " start=" << format_double(e.start_s) << " end=" << format_double(e.end_s);
        break;
      case EventKind::RestorePreshared:
        out << " link=" << e.link << " bytes=" << e.bytes;
        break;
      case EventKind::Corrupt:
        out << " link=" << e.link << " count=" << e.count << " channel=" << to_string(e.channel);
        break;
      default:
        break;
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::string> builtin_scenario_names() { return {"baseline", "failover", "dos-recovery", "multipath"}; }

namespace {

// The direct link between the gateways of Alice and Bob, or failing that
// the first backbone link on their shortest path.
std::string gateway_link(const Topology& topo) {
  const LinkSpec* la = topo.access_link("Alice");
  const LinkSpec* lb = topo.access_link("Bob");
  if (!la || !lb) bad("built-in scenarios need end users named Alice and Bob");
  const std::string ga = la->other("Alice");
  const std::string gb = lb->other("Bob");
  for (const LinkSpec* l : topo.links_of(ga)) {
    if (l->other(ga) == gb) return l->id;
  }
  LinkStateDB db;
  for (const auto& [id, l] : topo.links()) {
    db.install({id, l.a, 1, true, 1u << 20, 1.0, 0.0});
    db.install({id, l.b, 1, true, 1u << 20, 1.0, 0.0});
  }
  Path p = shortest_path(topo, db, ga, gb);
  return p.links.front();
}

}  // namespace

Scenario builtin_scenario(std::string_view name, const Topology& topology) {
  std::string text;
  if (name == "baseline") {
    text =
        "[scenario] name=baseline duration=10 seed=42 sample=0.5\n"
        "[event] t=1 kind=request id=1 src=Alice dst=Bob bytes=4096 k=1\n"
        "[event] t=4 kind=request id=2 src=Bob dst=Alice bytes=2048 k=2\n"
        "[event] t=7 kind=request id=3 src=Alice dst=Bob bytes=8192 k=3\n";
  } else if (name == "failover") {
    const std::string l = gateway_link(topology);
    text =
        "[scenario] name=failover duration=6 seed=42 sample=0.1\n"
        "[event] t=2 kind=request id=1 src=Alice dst=Bob bytes=16384 k=3\n"
        "[event] t=2.012 kind=fail link=" + l + "\n";
  } else if (name == "dos-recovery") {
    const std::string l = gateway_link(topology);
    text =
        "[scenario] name=dos-recovery duration=16 seed=42 sample=0.5\n"
        "[event] t=1 kind=dos link=" + l + " rate=20000 duration=9\n"
        "[event] t=10.5 kind=restore_preshared link=" + l + " bytes=16384\n"
        "[event] t=14 kind=request id=1 src=Alice dst=Bob bytes=2048 k=1\n";
  } else if (name == "multipath") {
    text =
        "[scenario] name=multipath duration=8 seed=42 sample=0.5\n"
        "[event] t=3 kind=request id=1 src=Alice dst=Bob bytes=24576 k=3\n";
  } else {
    throw Error(Errc::InvalidArgument, "unknown built-in scenario '" + std::string(name) + "'");
  }
  Scenario sc = load_scenario(text);
  sc.validate(topology);
  return sc;
}

}  // namespace qkdnet
