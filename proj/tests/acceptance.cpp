// Acceptance runner: one PASS/FAIL line per criterion. With no arguments
// every criterion runs; otherwise only the numbered ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "qkdnet/link_engine.hpp"
#include "qkdnet/planner.hpp"
#include "qkdnet/q3p.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/routing.hpp"
#include "qkdnet/sim.hpp"
#include "qkdnet/topology.hpp"
#include "qkdnet/transport.hpp"

using namespace qkdnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1

Outcome scaling() {
  Outcome o;
  const auto rows = scaling_table({5, 100});
  o.require(rows[0].full_mesh_links == 10 && rows[0].network_links == 5, "N=5 row");
  o.require(rows[1].full_mesh_links == 4950 && rows[1].network_links == 100, "N=100 row");
  o.detail = o.pass ? "N=5: 10 vs 5, N=100: 4950 vs 100" : o.detail;
  return o;
}

// ---- 2

LinkStateDB rated_db(const Topology& t) {
  LinkStateDB db;
  for (const auto& [id, l] : t.links()) {
    const double r = key_rate(t.profile_of(l), l.length_km);
    db.install({id, l.a, 1, true, 65536, r, 0});
    db.install({id, l.b, 1, true, 65536, r, 0});
  }
  return db;
}

Outcome multipath() {
  Outcome o;
  const Topology t = building_block_preset();
  const LinkStateDB db = rated_db(t);
  const auto paths = disjoint_paths(t, db, "Alice", "Bob", 3);
  std::set<std::string> got;
  for (const auto& p : paths) got.insert(describe(p));
  const std::set<std::string> expected{"Alice>A>B>Bob", "Alice>A>C>B>Bob", "Alice>A>D>B>Bob"};
  o.require(got == expected, "paths differ from the three expected routes");

  // Brute force: the cheapest set of three mutually disjoint simple paths.
  const SharedSegments shared = shared_segments(t, "Alice", "Bob");
  const auto all = oracle::simple_paths(t, "Alice", "Bob");
  auto cost = [&](const std::vector<std::string>& links) {
    double c = 0;
    for (const auto& id : links) c += link_cost(db, t.link(id), t, RouteCostParams{});
    return c;
  };
  auto disjoint = [&](const std::vector<std::string>& x, const std::vector<std::string>& y) {
    const auto nx = oracle::nodes_of(t, "Alice", x), ny = oracle::nodes_of(t, "Alice", y);
    for (const auto& n : nx) {
      if (!shared.nodes.count(n) && n != "Alice" && n != "Bob" && std::count(ny.begin(), ny.end(), n)) return false;
    }
    for (const auto& l : x) {
      if (!shared.links.count(l) && std::count(y.begin(), y.end(), l)) return false;
    }
    return true;
  };
  double best = INFINITY;
  std::set<std::string> best_set;
  int optimal_sets = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      for (std::size_t k = j + 1; k < all.size(); ++k) {
        if (!disjoint(all[i], all[j]) || !disjoint(all[i], all[k]) || !disjoint(all[j], all[k])) continue;
        const double c = cost(all[i]) + cost(all[j]) + cost(all[k]);
        auto name = [&](const std::vector<std::string>& p) {
          Path path{oracle::nodes_of(t, "Alice", p), p, 0};
          return describe(path);
        };
        if (c < best - 1e-9) {
          best = c;
          best_set = {name(all[i]), name(all[j]), name(all[k])};
          optimal_sets = 1;
        } else if (std::abs(c - best) <= 1e-9) {
          ++optimal_sets;
        }
      }
    }
  }
  o.require(optimal_sets == 1 && best_set == got, "brute force disagrees");

  auto rate = [&](const char* id) {
    const LinkSpec& l = t.link(id);
    return key_rate(t.profile_of(l), l.length_km);
  };
  const double hand = std::min({rate("LA"), rate("LB"),
                                rate("L5") + std::min(rate("L1"), rate("L2")) + std::min(rate("L3"), rate("L4"))});
  const double agg = aggregate_rate(t, db, "Alice", "Bob", 3);
  o.require(agg == hand, "aggregate " + fmt("%.6f", agg) + " != " + fmt("%.6f", hand));
  if (o.pass) o.detail = std::to_string(all.size()) + " simple paths checked, aggregate " + fmt("%.1f", agg) + " bit/s";
  return o;
}

// ---- 3

Outcome failover() {
  Outcome o;
  for (const auto& topo : {vienna_preset(), building_block_preset()}) {
    const Scenario sc = builtin_scenario("failover", topo);
    std::string link;
    double fail_at = 0;
    for (const auto& e : sc.events) {
      if (e.kind == EventKind::LinkFail) {
        link = e.link;
        fail_at = e.time_s;
      }
    }
    const MetricsReport r = run(topo, sc, sc.seed);
    o.require(r.records.size() == 1, link + ": expected one delivery");
    if (r.records.empty()) continue;
    const DeliveryRecord& rec = r.records.front();
    o.require(rec.status == DeliveryStatus::Delivered, link + ": " + to_string(rec.status));
    o.require(!rec.secret_at_src.empty() && rec.secret_at_src == rec.secret_at_dst, link + ": secrets differ");
    std::size_t before = 0;
    for (const auto& h : r.hops) {
      if (h.link != link) continue;
      o.require(h.time_s < fail_at, link + ": segment sent after the failure");
      ++before;
    }
    if (o.pass) {
      o.detail += (o.detail.empty() ? "" : ", ") + link + " failed at " + fmt("%.3f", fail_at) + ", delivered at " +
                  fmt("%.3f", rec.completion_s.value_or(-1)) + " (" + std::to_string(before) + " hops before)";
    }
  }
  return o;
}

// ---- 4

Outcome dos_recovery() {
  Outcome o;
  for (const auto& topo : {vienna_preset(), building_block_preset()}) {
    const Scenario sc = builtin_scenario("dos-recovery", topo);
    std::string link;
    for (const auto& e : sc.events) {
      if (e.kind == EventKind::DosDrain) link = e.link;
    }
    const MetricsReport r = run(topo, sc, sc.seed);
    std::uint64_t floor_level = UINT64_MAX;
    for (const auto& s : r.samples) {
      if (s.link == link) floor_level = std::min(floor_level, s.level_bytes);
    }
    o.require(floor_level <= kDefaultAuthReserveBytes, link + ": never drained to the reserve");
    bool marked = false;
    for (const auto& u : r.unusable) marked |= u.link == link;
    o.require(marked, link + ": never marked unusable");
    o.require(r.refills.size() == 1, link + ": expected one refill");
    if (r.refills.empty()) continue;
    const RefillRecord& rf = r.refills.front();
    o.require(rf.identical, link + ": refill differs between ends");
    o.require(rf.bytes >= 8192 && rf.level_a >= 8192 && rf.level_b >= 8192, link + ": refill below 8192 bytes");
    for (const auto& rec : r.records) {
      if (rec.request_id != rf.request_id) continue;
      for (const auto& p : rec.paths_used) {
        o.require(std::find(p.links.begin(), p.links.end(), link) == p.links.end(), link + ": refill used the link");
      }
    }
    o.require(r.conservation_violations == 0 && r.ledgers_exclusive, link + ": accounting");
    if (o.pass) {
      o.detail += (o.detail.empty() ? "" : ", ") + link + " floor " + std::to_string(floor_level) + " B, refilled to " +
                  std::to_string(rf.level_a) + "/" + std::to_string(rf.level_b);
    }
  }
  return o;
}

// ---- 5

Outcome gate() {
  Outcome o;
  const DeviceProfile good{"good", 10000, 0.2, 100, 30, false};
  const DeviceProfile weak{"weak", 2000, 0.2, 100, 30, false};
  const DeviceProfile slow{"slow", 10000, 0.2, 100, 90, false};
  const double rg = key_rate(good, 25), rw = key_rate(weak, 25);
  o.require(std::floor(rg) == 3162 && qualifies_for_deployment(good), "10 kbit/s profile");
  o.require(std::floor(rw) == 632 && !qualifies_for_deployment(weak), "2 kbit/s profile");
  o.require(!qualifies_for_deployment(slow), "90 s restart profile");
  if (o.pass) o.detail = "R(25)=" + fmt("%.0f", rg) + " pass, " + fmt("%.0f", rw) + " fail, 90 s restart fail";
  return o;
}

// ---- 6

Outcome optimum() {
  Outcome o;
  double worst = 0;
  for (double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    PlannerParams p;
    p.alpha_db_per_km = alpha;
    p.total_distance_km = 100;
    const double diff = std::abs(optimal_link_length(p) - closed_form_optimum_km(alpha));
    worst = std::max(worst, diff);
    o.require(diff <= 0.01 + 1e-9, "relaxed scan off by " + fmt("%.4f", diff) + " at alpha " + fmt("%.1f", alpha));
  }
  PlannerParams p;
  p.alpha_db_per_km = 0.2;
  p.total_distance_km = 100;
  const double relaxed = optimal_link_length(p);
  o.require(relaxed >= 15 && relaxed <= 30, "alpha 0.2 optimum outside 15-30 km");
  const double integer = optimal_link_length(p, true);
  o.require(std::abs(integer - 25.0) < 1e-9, "integer scan gives " + fmt("%.2f", integer) + " km, not 25 km");
  const std::string summary = "closed form within " + fmt("%.4f", worst) + " km, alpha 0.2: " + fmt("%.2f", relaxed) +
                              " km relaxed, " + fmt("%.2f", integer) + " km integer";
  o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
  return o;
}

// ---- 7

Scenario random_scenario(const Topology& t, Rng& r) {
  Scenario sc;
  sc.name = "random";
  sc.duration_s = 12;
  sc.seed = r.next_u64();
  sc.loss_prob = 0.2 * r.uniform01();
  sc.jitter_s = 0.003 * r.uniform01();
  sc.sample_period_s = 1.0;
  std::vector<std::string> links, nodes;
  for (const auto& [id, l] : t.links()) links.push_back(id);
  for (const auto& [n, node] : t.nodes()) nodes.push_back(n);
  auto pick = [&](const std::vector<std::string>& v) { return v[r.next_u64() % v.size()]; };

  const int failures = static_cast<int>(r.next_u64() % 4);
  for (int i = 0; i < failures; ++i) {
    Event f;
    f.kind = EventKind::LinkFail;
    f.link = pick(links);
    f.time_s = 0.5 + 8.0 * r.uniform01();
    sc.events.push_back(f);
    if (r.next_u64() % 2) {
      Event back = f;
      back.kind = EventKind::LinkRestore;
      back.time_s = std::min(11.5, f.time_s + 3.0 * r.uniform01());
      sc.events.push_back(back);
    }
  }
  if (r.next_u64() % 4 == 0) {
    Event c;
    c.kind = EventKind::Corrupt;
    c.link = pick(links);
    c.count = 1 + r.next_u64() % 3;
    c.time_s = 10.0 * r.uniform01();
    sc.events.push_back(c);
  }
  if (r.next_u64() % 5 == 0) {
    Event d;
    d.kind = EventKind::DosDrain;
    d.link = pick(links);
    d.rate_bytes_per_s = 5000;
    d.duration_s = 3;
    d.time_s = 1.0 + 5.0 * r.uniform01();
    sc.events.push_back(d);
  }
  const int requests = 1 + static_cast<int>(r.next_u64() % 4);
  for (int i = 0; i < requests; ++i) {
    KeyDeliveryRequest q;
    q.src = pick(nodes);
    do q.dst = pick(nodes);
    while (q.dst == q.src);
    q.n_bytes = 1 + r.next_u64() % 8000;
    q.multipath = 1 + r.next_u64() % 3;
    Event e;
    e.kind = EventKind::KeyRequest;
    e.time_s = 0.5 + 9.0 * r.uniform01();
    e.request = q;
    sc.events.push_back(e);
  }
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const Event& x, const Event& y) { return x.time_s < y.time_s; });
  return sc;
}

Outcome otp_discipline() {
  Outcome o;
  Rng r(20240607);
  const Topology topos[2] = {vienna_preset(), building_block_preset()};
  std::size_t delivered = 0;
  std::map<std::string, std::size_t> other;
  for (int i = 0; i < 100; ++i) {
    const Topology& t = topos[i % 2];
    const Scenario sc = random_scenario(t, r);
    Engine e(t, sc, sc.seed);
    const MetricsReport rep = e.finish();
    const std::string tag = "run " + std::to_string(i);
    o.require(rep.ledgers_exclusive && e.network().ledgers_exclusive(), tag + ": key bytes reused");
    o.require(rep.conservation_violations == 0 && e.network().accounting_exact(), tag + ": accounting");
    for (const auto& rec : rep.records) {
      if (rec.status == DeliveryStatus::Delivered) {
        ++delivered;
        o.require(rec.secret_at_src == rec.secret_at_dst && rec.secret_at_src.size() == rec.n_bytes,
                  tag + ": delivered secrets differ");
      } else {
        ++other[std::string(to_string(rec.status)) + "/" + (rec.failure ? to_string(*rec.failure) : "-")];
      }
    }
  }
  if (o.pass) {
    o.detail = "100 runs, " + std::to_string(delivered) + " delivered bit-equal";
    for (const auto& [why, n] : other) o.detail += ", " + std::to_string(n) + " " + why;
  }
  return o;
}

// ---- 8

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism() {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / "qkdnet_acceptance_determinism";
  fs::remove_all(base);
  std::ostringstream sink;
  for (const char* d : {"a", "b"}) {
    const int code = cli::run_cli(
        {"run", "--preset", "vienna", "--scenario", "baseline", "--seed", "42", "--out", (base / d).string()}, sink,
        sink);
    o.require(code == 0, std::string("run ") + d + " exited " + std::to_string(code));
  }
  std::size_t bytes = 0;
  for (const char* f : {"metrics.csv", "summary.json", "audit.csv", "hops.csv"}) {
    const std::string a = slurp(base / "a" / f), b = slurp(base / "b" / f);
    o.require(!a.empty() && a == b, std::string(f) + " differs");
    bytes += a.size();
  }
  fs::remove_all(base);
  if (o.pass) o.detail = "4 files, " + std::to_string(bytes) + " bytes identical";
  return o;
}

// ---- 9

Outcome forgery() {
  Outcome o;
  Rng r(77);
  const Bytes init = r.bytes(4u << 20);
  Q3PEndpoint a("L", "A", "B", true, init), b("L", "B", "A", false, init);
  int accepted = 0, refused = 0;
  for (int i = 0; i < 10000; ++i) {
    Q3PMessage m = a.seal(Channel::Transport, r.bytes(18), r.bytes(1 + r.next_u64() % 64), {true, true});
    const std::size_t bits = (m.payload.size() + kTagBytes) * 8;
    const std::size_t bit = r.next_u64() % bits;
    if (bit < m.payload.size() * 8) {
      m.payload[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    } else {
      const std::size_t tb = bit - m.payload.size() * 8;
      m.tag[tb / 8] ^= static_cast<std::uint8_t>(1u << (tb % 8));
    }
    try {
      b.open(m);
      ++accepted;
    } catch (const Error& e) {
      if (e.code() == Errc::TagMismatch) ++refused;
    }
  }
  o.require(accepted == 0, std::to_string(accepted) + " forgeries accepted");
  o.require(refused == 10000, "unexpected errors");
  if (o.pass) o.detail = "10000 flips, 0 accepted";
  return o;
}

struct Criterion {
  int n;
  const char* name;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "link count scaling", 1, scaling},
      {2, "building-block multipath", 1, multipath},
      {3, "failover", 10, failover},
      {4, "DoS recovery", 10, dos_recovery},
      {5, "deployment gate", 0, gate},
      {6, "optimal link length", 5, optimum},
      {7, "one-time pad discipline", 120, otp_discipline},
      {8, "determinism", 0, determinism},
      {9, "authentication soundness", 30, forgery},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  bool ok = true;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) out.require(false, "took longer than " + fmt("%.0f", c.limit_s) + " s");
    std::printf("criterion %d: %s  %s: %s [%.3f s]\n", c.n, out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                secs);
    ok &= out.pass;
  }
  return ok ? 0 : 1;
}
