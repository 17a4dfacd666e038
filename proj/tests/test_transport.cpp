#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "oracles.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/network.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/transport.hpp"

using namespace qkdnet;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

// Alice - A - M - B - Bob
Topology line_topology(std::uint64_t preshared = 65536) {
  Topology t;
  t.add_profile({"p", 50000, 0.2, 100, 10, false});
  for (const char* n : {"A", "M", "B"}) t.add_node({n, NodeKind::QbbNode});
  t.add_node({"Alice", NodeKind::EndUser});
  t.add_node({"Bob", NodeKind::EndUser});
  t.add_link({"AM", "A", "M", 20, "p", LinkClass::QbbFiber, preshared});
  t.add_link({"MB", "M", "B", 20, "p", LinkClass::QbbFiber, preshared});
  t.add_link({"LA", "Alice", "A", 2, "p", LinkClass::QanFiber, preshared});
  t.add_link({"LB", "Bob", "B", 2, "p", LinkClass::QanFiber, preshared});
  t.validate();
  return t;
}

std::unique_ptr<Network> started(const Topology& t, NetworkConfig cfg = {}) {
  auto net = std::make_unique<Network>(t, cfg);
  net->start();
  net->queue().run_until(1.0);
  return net;
}

KeyDeliveryRequest req(const std::string& src, const std::string& dst, std::uint64_t n, std::size_t k = 1) {
  KeyDeliveryRequest r;
  r.src = src;
  r.dst = dst;
  r.n_bytes = n;
  r.multipath = k;
  return r;
}

std::uint64_t transport_ledger(const Network& net, const std::string& link) {
  const LinkSpec& l = net.topology().link(link);
  return net.endpoint(l.a, link).tx().ledger().bytes_for(Channel::Transport) +
         net.endpoint(l.b, link).tx().ledger().bytes_for(Channel::Transport);
}

}  // namespace

TEST_CASE("segment codec") {
  TransportSegment s{7, 3, 9, Bytes{1, 2, 3}, {}};
  const Bytes wire = encode_segment(s);
  CHECK(wire.size() == kSegmentHeaderBytes + 3);
  CHECK(decode_segment(wire) == s);
  CHECK(encode_segment_header(s).size() == kSegmentHeaderBytes);
  Bytes bad = wire;
  bad.pop_back();
  CHECK(code_of([&] { decode_segment(bad); }) == Errc::ParseError);
  TransportSegment out_of_range{7, 9, 9, Bytes{1}, {}};
  CHECK(code_of([&] { decode_segment(encode_segment(out_of_range)); }) == Errc::ParseError);
}

TEST_CASE("fragment sizes") {
  CHECK(fragment_sizes(1000) == std::vector<std::uint64_t>{1000});
  CHECK(fragment_sizes(1024) == std::vector<std::uint64_t>{1024});
  CHECK(fragment_sizes(2500) == std::vector<std::uint64_t>{1024, 1024, 452});
  CHECK(fragment_sizes(0).empty());
}

TEST_CASE("proportional split: sums match and each share is within one of its quota") {
  Rng r(12);
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t count = r.next_u64() % 200;
    std::vector<std::uint64_t> w(1 + r.next_u64() % 5);
    for (auto& x : w) x = r.next_u64() % 100000;
    const auto out = proportional_split(count, w);
    std::uint64_t sum = 0, wsum = 0;
    for (auto x : out) sum += x;
    for (auto x : w) wsum += x;
    CHECK(sum == count);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double quota = wsum ? double(count) * double(w[k]) / double(wsum) : double(count) / double(w.size());
      CHECK(double(out[k]) >= std::floor(quota) - 1e-9);
      CHECK(double(out[k]) <= std::ceil(quota) + 1e-9);
    }
  }
  CHECK(proportional_split(8, {1, 1, 1}) == std::vector<std::uint64_t>{3, 3, 2});
  CHECK(proportional_split(4, {0, 0}) == std::vector<std::uint64_t>{2, 2});
}

TEST_CASE("relay hop re-encrypts with fresh key and reports the exposure") {
  Rng r(5);
  const Bytes k1 = r.bytes(16384), k2 = r.bytes(16384);
  Q3PEndpoint a_out("X", "A", "M", true, k1), m_in("X", "M", "A", false, k1);
  Q3PEndpoint m_out("Y", "M", "B", true, k2), b_in("Y", "B", "M", false, k2);
  TransportSegment s{1, 0, 1, r.bytes(1000), {}};
  Q3PMessage m1 = seal_segment(a_out, s, 0.0);
  RelayResult rr = relay_hop(m1, m_in, m_out, 0.5);
  CHECK(rr.exposure.node == "M");
  CHECK(rr.exposure.bytes == 1000);
  CHECK(rr.forwarded.payload != m1.payload);
  CHECK(open_segment(b_in, rr.forwarded) == s);
  CHECK(m_out.tx().ledger().total_bytes() == 1032);
  CHECK(a_out.tx().ledger().total_bytes() == 1032);

  Q3PMessage m2 = seal_segment(a_out, s);
  m2.payload[30] ^= 1;
  CHECK(code_of([&] { relay_hop(m2, m_in, m_out); }) == Errc::TagMismatch);

  Q3PEndpoint poor("Z", "M", "C", true, r.bytes(8192));  // 4096 per direction: nothing above the reserve
  Q3PMessage m3 = seal_segment(a_out, s);
  CHECK(code_of([&] { relay_hop(m3, m_in, poor); }) == Errc::KeyExhausted);
}

TEST_CASE("1000 bytes over a single route: every link pays 1000 + 32") {
  const Topology t = line_topology();
  auto net = started(t);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 1000));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.secret_at_src == rec.secret_at_dst);
  CHECK(rec.secret_at_src.size() == 1000);
  for (const char* l : {"LA", "AM", "MB", "LB"}) {
    CHECK(rec.consumption.at(l) == 1032);
    CHECK(transport_ledger(*net, l) == 1032);
  }
  CHECK(net->exposures().size() == 3);  // A, M and B each held the fragment
  CHECK(net->ledgers_exclusive());
  CHECK(net->accounting_exact());
}

TEST_CASE("two-hop relay between backbone nodes exposes plaintext at the middle node only") {
  const Topology t = line_topology();
  auto net = started(t);
  const DeliveryRecord rec = net->deliver_key(req("A", "B", 3000));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.segments == 3);
  REQUIRE(net->exposures().size() == 3);
  for (const auto& e : net->exposures()) CHECK(e.node == "M");
  CHECK(rec.consumption.at("AM") == 3000 + 3 * 32);
}

TEST_CASE("a lost segment is resent with fresh key: the hop pays twice") {
  const Topology t = line_topology();
  auto net = started(t);
  net->inject_loss("AM", 1);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 1000));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.secret_at_src == rec.secret_at_dst);
  CHECK(rec.consumption.at("AM") == 2 * 1032);
  CHECK(rec.consumption.at("MB") == 1032);
  CHECK(rec.retransmissions == 1);
  CHECK(transport_ledger(*net, "AM") == 2 * 1032);
  CHECK(net->ledgers_exclusive());
}

TEST_CASE("a corrupted segment is dropped and resent with disjoint key ranges") {
  const Topology t = line_topology();
  auto net = started(t);
  net->inject_corruption("MB", 1);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 500));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.secret_at_src == rec.secret_at_dst);
  CHECK(net->counters().tag_failures == 1);
  CHECK(rec.consumption.at("MB") == 2 * 532);
  std::vector<KeyRange> ranges;
  for (const auto& r : net->endpoint("M", "MB").tx().ledger().records()) {
    if (r.tag.channel == Channel::Transport) ranges.push_back(r.range);
  }
  REQUIRE(ranges.size() == 4);  // two pads, two tag keys
  CHECK(net->endpoint("M", "MB").tx().ledger().exclusive());
  CHECK(net->endpoint("B", "MB").rx().ledger().exclusive());
}

TEST_CASE("six consecutive losses exhaust the retry budget") {
  const Topology t = line_topology();
  NetworkConfig cfg;
  cfg.window = 1;
  auto net = started(t, cfg);
  net->inject_loss("AM", 6);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 2048));
  CHECK(rec.status == DeliveryStatus::Partial);
  CHECK(rec.failure == Errc::RetryLimitExceeded);
  CHECK(rec.delivered_segments == 1);
  CHECK(rec.failed_segments == 1);
  CHECK(rec.secret_at_src != rec.secret_at_dst);

  auto net2 = started(t, cfg);
  net2->inject_loss("AM", 6);
  const DeliveryRecord one = net2->deliver_key(req("Alice", "Bob", 100));
  CHECK(one.status == DeliveryStatus::Failed);
  CHECK(one.consumption.at("AM") == 6 * 132);
}

TEST_CASE("no route: deliver_key throws, submit records a failure without spending key") {
  const Topology t = building_block_preset();
  auto net = started(t);
  KeyDeliveryRequest r = req("Alice", "Bob", 1000);
  r.excluded_links = {"LA"};
  CHECK(code_of([&] { net->deliver_key(r); }) == Errc::NoRoute);
  const std::uint64_t id = net->submit(r);
  CHECK(net->record(id).status == DeliveryStatus::Failed);
  CHECK(net->record(id).failure == Errc::NoRoute);
  CHECK(net->record(id).consumption.empty());
  CHECK(code_of([&] { net->submit(req("Alice", "Alice", 10)); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { net->submit(req("Alice", "Bob", 0)); }) == Errc::InvalidArgument);
}

TEST_CASE("building block, k = 3 with equal stores: one third of the payload per path") {
  const Topology t = building_block_preset();
  auto net = started(t);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 3 * 1024, 3));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.paths_used.size() == 3);
  CHECK(rec.consumption.at("L5") == 1056);
  CHECK(rec.consumption.at("L1") == 1056);
  CHECK(rec.consumption.at("L3") == 1056);
  CHECK(rec.consumption.at("LA") == 3 * 1056);
  CHECK(rec.consumption.count("L6") == 0);
}

TEST_CASE("a store below twice the reserve pushes segments onto another route") {
  Topology t = building_block_preset();
  Topology low;
  for (const auto& [n, node] : t.nodes()) low.add_node(node);
  for (const auto& [p, prof] : t.profiles()) low.add_profile(prof);
  for (auto [id, l] : t.links()) {
    if (id == "L5") l.preshared_bytes = 12000;  // 6000 per direction: usable, but under 2 x 4096
    low.add_link(l);
  }
  auto net = started(low);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 1000));
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.paths_used.front().links == std::vector<std::string>{"LA", "L5", "LB"});
  CHECK(rec.reroutes >= 1);
  CHECK(rec.consumption.count("L5") == 0);
}

TEST_CASE("plaintext only ever appears on nodes of the paths used") {
  const Topology t = vienna_preset();
  NetworkConfig cfg;
  cfg.loss_prob = 0.1;
  cfg.seed = 3;
  auto net = started(t, cfg);
  const DeliveryRecord rec = net->deliver_key(req("Alice", "Bob", 8000, 3));
  CHECK(rec.status == DeliveryStatus::Delivered);
  std::set<std::string> on_path;
  for (const auto& p : rec.paths_used) on_path.insert(p.nodes.begin(), p.nodes.end());
  for (const auto& e : net->exposures()) CHECK(on_path.count(e.node) == 1);
  CHECK(on_path.count("STP") == 0);
}

TEST_CASE("failover: the direct block link dies mid-delivery") {
  const Topology t = building_block_preset();
  auto net = started(t);
  const std::uint64_t id = net->submit(req("Alice", "Bob", 12 * 1024, 3));
  net->queue().run_until(net->now() + 0.012);
  const double fail_at = net->now();
  net->fail_link("L5");
  net->queue().run_while_pending([&] { return net->record(id).finished(); }, 100);
  const DeliveryRecord& rec = net->record(id);
  CHECK(rec.status == DeliveryStatus::Delivered);
  CHECK(rec.secret_at_src == rec.secret_at_dst);
  for (const auto& h : net->hops()) {
    if (h.link == "L5") CHECK(h.time_s < fail_at);
  }
}

TEST_CASE("aggregate rate composes series and parallel links") {
  const Topology t = building_block_preset();
  LinkStateDB db = oracle::flat_db(t, 65536, 1000.0);
  CHECK(aggregate_rate(t, db, "Alice", "Bob", 3) == doctest::Approx(1000.0));  // access links cap it
  for (const char* l : {"LA", "LB"}) {
    const auto& spec = t.link(l);
    db.install({l, spec.a, 2, true, 65536, 10000.0, 0});
    db.install({l, spec.b, 2, true, 65536, 10000.0, 0});
  }
  CHECK(aggregate_rate(t, db, "Alice", "Bob", 3) == doctest::Approx(3000.0));
  CHECK(aggregate_rate(t, db, "Alice", "Bob", 1) == doctest::Approx(1000.0));
  db.install({"L3", "A", 2, false, 65536, 1000.0, 0});
  CHECK(aggregate_rate(t, db, "Alice", "Bob", 3) == doctest::Approx(2000.0));

  // Series: 3R, R, 2R -> R
  const Topology line = line_topology();
  LinkStateDB ldb;
  const std::map<std::string, double> rates{{"LA", 3000}, {"AM", 1000}, {"MB", 2000}, {"LB", 3000}};
  for (const auto& [id, rate] : rates) {
    ldb.install({id, line.link(id).a, 1, true, 65536, rate, 0});
    ldb.install({id, line.link(id).b, 1, true, 65536, rate, 0});
  }
  CHECK(aggregate_rate(line, ldb, "Alice", "Bob", 3) == doctest::Approx(1000.0));
}

TEST_CASE("restore preshared: refills both ends identically, fails on a cut") {
  const Topology t = vienna_preset();
  auto net = started(t);
  CHECK(code_of([&] { net->restore_preshared("BREIT-STP", 8192); }) == Errc::NoRoute);
  const std::uint64_t before_a = net->endpoint("SIE", "SIE-ERD").level();
  const std::uint64_t before_b = net->endpoint("ERD", "SIE-ERD").level();
  const std::uint64_t id = net->restore_preshared("SIE-ERD", 8192);
  net->queue().run_while_pending([&] { return net->record(id).finished(); }, 100);
  REQUIRE(net->refills().size() == 1);
  const RefillRecord& rf = net->refills().front();
  CHECK(rf.identical);
  CHECK(net->endpoint("SIE", "SIE-ERD").level() == before_a + 8192);
  CHECK(net->endpoint("ERD", "SIE-ERD").level() == before_b + 8192);
  for (const auto& p : net->record(id).paths_used) {
    CHECK(std::find(p.links.begin(), p.links.end(), "SIE-ERD") == p.links.end());
  }
  CHECK(net->accounting_exact());
  // The two ends now agree on the refill: a message sealed with it opens.
  Q3PMessage m = net->endpoint("SIE", "SIE-ERD").seal(Channel::Control, Bytes{1}, {false, true});
  CHECK(net->endpoint("ERD", "SIE-ERD").open(m) == Bytes{1});
}

TEST_CASE("flooding converges despite lost advertisements") {
  const Topology t = vienna_preset();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    NetworkConfig cfg;
    cfg.seed = seed;
    cfg.loss_prob = 0.2;
    auto net = started(t, cfg);
    CHECK(net->counters().lsa_retransmissions > 0);
    for (const auto& [name, node] : t.nodes()) {
      const LinkStateDB& db = net->agent(name).db();
      CHECK(db.size() == 2 * t.links().size());
      for (const auto& [id, l] : t.links()) {
        for (const std::string* end : {&l.a, &l.b}) {
          const Lsa* have = db.find(id, *end);
          REQUIRE(have);
          CHECK(have->seq == net->agent(*end).last_originated(id)->seq);
        }
      }
    }
  }
}
