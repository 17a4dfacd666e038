#include "qkdnet/routing.hpp"

#include <algorithm>
#include <cmath>

#include "qkdnet/error.hpp"

namespace qkdnet {

Bytes encode_lsa(const Lsa& lsa, const Topology& topology) {
  const LinkSpec& link = topology.link(lsa.link);
  if (!link.touches(lsa.origin)) {
    throw Error(Errc::InvalidArgument, "LSA origin '" + lsa.origin + "' is not an endpoint of '" + lsa.link + "'");
  }
  ByteWriter w;
  w.put_u32(fnv1a32(lsa.link));
  w.put_u64(lsa.seq);
  w.put_u8(static_cast<std::uint8_t>((lsa.up ? kLsaStatusUp : 0) | (lsa.origin == link.b ? kLsaOriginIsB : 0)));
  w.put_u64(lsa.level_bytes);
  w.put_u64(static_cast<std::uint64_t>(std::llround(lsa.rate_bps * 1000.0)));
  w.put_u64(static_cast<std::uint64_t>(std::llround(lsa.timestamp_s * 1000.0)));
  return std::move(w).bytes();
}

Lsa decode_lsa(ByteView payload, const Topology& topology) {
  ByteReader r(payload);
  const std::uint32_t hash = r.get_u32();
  const LinkSpec* link = nullptr;
  for (const auto& [id, l] : topology.links()) {
    if (fnv1a32(id) == hash) {
      link = &l;
      break;
    }
  }
  if (!link) throw Error(Errc::ParseError, "LSA for unknown link hash " + std::to_string(hash));
  Lsa lsa;
  lsa.link = link->id;
  lsa.seq = r.get_u64();
  const std::uint8_t status = r.get_u8();
  if (status & ~(kLsaStatusUp | kLsaOriginIsB)) throw Error(Errc::ParseError, "unknown LSA status bits");
  lsa.up = status & kLsaStatusUp;
  lsa.origin = (status & kLsaOriginIsB) ? link->b : link->a;
  lsa.level_bytes = r.get_u64();
  lsa.rate_bps = static_cast<double>(r.get_u64()) / 1000.0;
  lsa.timestamp_s = static_cast<double>(r.get_u64()) / 1000.0;
  if (r.remaining() != 0) throw Error(Errc::ParseError, "trailing bytes after LSA");
  return lsa;
}

bool LinkStateDB::install(const Lsa& lsa) {
  auto key = std::make_pair(lsa.link, lsa.origin);
  auto it = entries_.find(key);
  if (it != entries_.end() && it->second.seq >= lsa.seq) return false;
  entries_[key] = lsa;
  return true;
}

const Lsa* LinkStateDB::find(const std::string& link, const std::string& origin) const {
  auto it = entries_.find({link, origin});
  return it == entries_.end() ? nullptr : &it->second;
}

bool LinkStateDB::usable(const LinkSpec& link, const Topology&) const {
  const Lsa* a = find(link.id, link.a);
  const Lsa* b = find(link.id, link.b);
  return a && b && a->up && b->up && a->level_bytes > auth_reserve_ && b->level_bytes > auth_reserve_;
}

std::optional<std::uint64_t> LinkStateDB::min_level(const LinkSpec& link, const Topology&) const {
  const Lsa* a = find(link.id, link.a);
  const Lsa* b = find(link.id, link.b);
  if (!a || !b) return std::nullopt;
  return std::min(a->level_bytes, b->level_bytes);
}

double LinkStateDB::rate_bps(const LinkSpec& link, const Topology&) const {
  const Lsa* a = find(link.id, link.a);
  const Lsa* b = find(link.id, link.b);
  if (!a || !b || !a->up || !b->up) return 0.0;
  return std::min(a->rate_bps, b->rate_bps);
}

double link_cost(const Lsa* end_a, const Lsa* end_b, const RouteCostParams& params, std::uint64_t auth_reserve) {
  if (!end_a || !end_b || !end_a->up || !end_b->up) return kInfiniteCost;
  if (end_a->level_bytes <= auth_reserve || end_b->level_bytes <= auth_reserve) return kInfiniteCost;
  const double level = static_cast<double>(std::min(end_a->level_bytes, end_b->level_bytes));
  const double depletion = std::max(0.0, 1.0 - level / params.target_level_bytes);
  return params.hop_cost + params.scarcity_weight * depletion;
}

double link_cost(const LinkStateDB& db, const LinkSpec& link, const Topology&, const RouteCostParams& params) {
  return link_cost(db.find(link.id, link.a), db.find(link.id, link.b), params, db.auth_reserve());
}

std::string describe(const Path& path) {
  std::string out;
  for (const auto& n : path.nodes) {
    if (!out.empty()) out += '>';
    out += n;
  }
  return out;
}

namespace {

constexpr double kCostEpsilon = 1e-9;

struct Label {
  double cost = kInfiniteCost;
  std::vector<std::string> nodes;
  std::vector<std::string> links;
};

bool better(const Label& x, const Label& y) {
  if (x.cost < y.cost - kCostEpsilon) return true;
  if (y.cost < x.cost - kCostEpsilon) return false;
  return x.nodes < y.nodes;
}

}  // namespace

Path shortest_path(const Topology& topology, const LinkStateDB& db, const std::string& src, const std::string& dst,
                   const RouteCostParams& params, const RouteConstraints& constraints) {
  if (src == dst) throw Error(Errc::InvalidArgument, "source equals destination");
  if (!topology.find_node(src) || !topology.find_node(dst)) {
    throw Error(Errc::InvalidArgument, "unknown endpoint '" + (topology.find_node(src) ? dst : src) + "'");
  }

  std::map<std::string, Label> best;
  std::set<std::string> done;
  best[src] = Label{0.0, {src}, {}};

  while (true) {
    const std::string* pick = nullptr;
    for (const auto& [name, label] : best) {
      if (done.count(name)) continue;
      if (!pick || better(label, best.at(*pick))) pick = &name;
    }
    if (!pick) break;
    const std::string at = *pick;
    done.insert(at);
    if (at == dst) break;
    if (at != src && topology.is_end_user(at)) continue;

    const Label here = best.at(at);
    for (const LinkSpec* l : topology.links_of(at)) {
      if (constraints.excluded_links.count(l->id)) continue;
      const std::string& next = l->other(at);
      if (done.count(next)) continue;
      if (next != dst && constraints.excluded_nodes.count(next)) continue;
      const double c = link_cost(db, *l, topology, params);
      if (!std::isfinite(c)) continue;
      Label cand = here;
      cand.cost += c;
      cand.nodes.push_back(next);
      cand.links.push_back(l->id);
      auto it = best.find(next);
      if (it == best.end() || better(cand, it->second)) best[next] = std::move(cand);
    }
  }

  auto it = best.find(dst);
  if (it == best.end() || !done.count(dst)) {
    throw Error(Errc::NoRoute, "no usable path from '" + src + "' to '" + dst + "'");
  }
  return Path{it->second.nodes, it->second.links, it->second.cost};
}

SharedSegments shared_segments(const Topology& topology, const std::string& src, const std::string& dst) {
  SharedSegments shared;
  shared.nodes.insert(src);
  shared.nodes.insert(dst);
  for (const std::string& end : {src, dst}) {
    if (const LinkSpec* access = topology.access_link(end)) {
      shared.links.insert(access->id);
      shared.nodes.insert(access->other(end));
    }
  }
  return shared;
}

std::vector<Path> disjoint_paths(const Topology& topology, const LinkStateDB& db, const std::string& src,
                                 const std::string& dst, std::size_t k, const RouteCostParams& params,
                                 const RouteConstraints& constraints) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
  const SharedSegments shared = shared_segments(topology, src, dst);
  RouteConstraints working = constraints;
  std::vector<Path> out;
  while (out.size() < k) {
    Path p;
    try {
      p = shortest_path(topology, db, src, dst, params, working);
    } catch (const Error& e) {
      if (e.code() == Errc::NoRoute) break;
      throw;
    }
    if (std::find(out.begin(), out.end(), p) != out.end()) break;
    bool consumed_anything = false;
    for (const auto& n : p.nodes) {
      if (!shared.nodes.count(n)) consumed_anything |= working.excluded_nodes.insert(n).second;
    }
    for (const auto& l : p.links) {
      if (!shared.links.count(l)) consumed_anything |= working.excluded_links.insert(l).second;
    }
    out.push_back(std::move(p));
    if (!consumed_anything) break;
  }
  std::stable_sort(out.begin(), out.end(), [](const Path& x, const Path& y) { return x.cost < y.cost - kCostEpsilon; });
  return out;
}

RoutingAgent::RoutingAgent(std::string node, const Topology& topology, std::uint64_t auth_reserve)
    : node_(std::move(node)), topology_(&topology), db_(auth_reserve) {}

const Lsa& RoutingAgent::originate(const std::string& link, bool up, std::uint64_t level, double rate_bps,
                                   double now) {
  if (!topology_->link(link).touches(node_)) {
    throw Error(Errc::InvalidArgument, "node '" + node_ + "' cannot advertise foreign link '" + link + "'");
  }
  Lsa lsa{link, node_, ++own_seq_[link], up, level, rate_bps, now};
  db_.install(lsa);
  for (const LinkSpec* l : topology_->links_of(node_)) pending_.push_back({{link, node_}, lsa.seq, l->id});
  return *db_.find(link, node_);
}

const Lsa* RoutingAgent::last_originated(const std::string& link) const { return db_.find(link, node_); }

bool RoutingAgent::receive(const Lsa& lsa, const std::string& from_link) {
  if (lsa.origin == node_) return false;
  if (!db_.install(lsa)) return false;
  for (const LinkSpec* l : topology_->links_of(node_)) {
    if (l->id != from_link) pending_.push_back({{lsa.link, lsa.origin}, lsa.seq, l->id});
  }
  return true;
}

void RoutingAgent::resend(const std::string& link, const std::string& origin, const std::string& via_link) {
  if (const Lsa* current = db_.find(link, origin)) pending_.push_back({{link, origin}, current->seq, via_link});
}

void RoutingAgent::sync(const std::string& via_link) {
  for (const auto& [key, lsa] : db_.entries()) pending_.push_back({key, lsa.seq, via_link});
}

std::vector<OutgoingMessage> RoutingAgent::flood_lsas(std::map<std::string, Q3PEndpoint>& endpoints, double now,
                                                      const std::set<std::string>& unreachable_links) {
  std::vector<OutgoingMessage> out;
  std::deque<Pending> keep;
  while (!pending_.empty()) {
    Pending p = std::move(pending_.front());
    pending_.pop_front();
    const Lsa* current = db_.find(p.key.first, p.key.second);
    if (!current || current->seq != p.seq) continue;  // superseded
    auto ep = endpoints.find(p.via_link);
    if (ep == endpoints.end() || unreachable_links.count(p.via_link) ||
        !ep->second.can_seal(0, {false, true})) {
      keep.push_back(std::move(p));
      continue;
    }
    Bytes payload = encode_lsa(*current, *topology_);
    out.push_back({p.via_link, ep->second.peer(), ep->second.seal(Channel::Routing, payload, {false, true}, now)});
  }
  pending_ = std::move(keep);
  return out;
}

}  // namespace qkdnet
