#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/bytes.hpp"
#include "qkdnet/q3p.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

struct LinkStateAdvertisement {
  std::string link;
  std::string origin;  // one of the link's two endpoints
  std::uint64_t seq = 0;
  bool up = false;
  std::uint64_t level_bytes = 0;  // origin's sending-direction store level
  double rate_bps = 0.0;
  double timestamp_s = 0.0;

  friend bool operator==(const LinkStateAdvertisement&, const LinkStateAdvertisement&) = default;
};
using Lsa = LinkStateAdvertisement;

inline constexpr std::size_t kLsaPayloadBytes = 4 + 8 + 1 + 8 + 8 + 8;
inline constexpr std::uint8_t kLsaStatusUp = 0x01;
inline constexpr std::uint8_t kLsaOriginIsB = 0x02;

// Big-endian: u32 link-id hash, u64 seq, u8 status, u64 level,
// u64 rate in millibits/s, u64 timestamp in ms. Status bit 0 is Up; bit 1
// says the origin is the link's `b` endpoint (the payload has no room for a
// node name).
Bytes encode_lsa(const Lsa& lsa, const Topology& topology);
Lsa decode_lsa(ByteView payload, const Topology& topology);

class LinkStateDB {
 public:
  explicit LinkStateDB(std::uint64_t auth_reserve = kDefaultAuthReserveBytes) : auth_reserve_(auth_reserve) {}

  // Installs `lsa` if its seq is newer than what is held for
  // (link, origin). Stale or duplicate advertisements return false.
  bool install(const Lsa& lsa);

  const Lsa* find(const std::string& link, const std::string& origin) const;
  // Usable iff both ends advertise Up with levels above the auth reserve.
  bool usable(const LinkSpec& link, const Topology& topology) const;
  std::optional<std::uint64_t> min_level(const LinkSpec& link, const Topology& topology) const;
  double rate_bps(const LinkSpec& link, const Topology& topology) const;

  std::uint64_t auth_reserve() const { return auth_reserve_; }
  const std::map<std::pair<std::string, std::string>, Lsa>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const LinkStateDB& x, const LinkStateDB& y) { return x.entries_ == y.entries_; }

 private:
  std::uint64_t auth_reserve_;
  std::map<std::pair<std::string, std::string>, Lsa> entries_;
};

struct RouteCostParams {
  double hop_cost = 1.0;
  double scarcity_weight = 1.0;
  double target_level_bytes = 65536.0;
};

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// hop + lambda * max(0, 1 - min(levelA, levelB) / T); infinite when either
/// end is missing, Down, or at or below the auth reserve.
double link_cost(const Lsa* end_a, const Lsa* end_b, const RouteCostParams& params,
                 std::uint64_t auth_reserve = kDefaultAuthReserveBytes);
double link_cost(const LinkStateDB& db, const LinkSpec& link, const Topology& topology,
                 const RouteCostParams& params);

struct Path {
  std::vector<std::string> nodes;
  std::vector<std::string> links;
  double cost = 0.0;

  std::size_t hops() const { return links.size(); }
  friend bool operator==(const Path& x, const Path& y) { return x.nodes == y.nodes && x.links == y.links; }
};

std::string describe(const Path& path);

struct RouteConstraints {
  std::set<std::string> excluded_links;
  std::set<std::string> excluded_nodes;
};

/// Minimum-cost path. End users are never transit nodes. Equal-cost paths
/// are ordered by their node-name sequence. Errc::NoRoute if none.
Path shortest_path(const Topology& topology, const LinkStateDB& db, const std::string& src, const std::string& dst,
                   const RouteCostParams& params = {}, const RouteConstraints& constraints = {});

/// Links and nodes every src->dst path must use: the access links of end
/// users and the gateways they hang off. They are exempt from disjointness.
struct SharedSegments {
  std::set<std::string> links;
  std::set<std::string> nodes;
};
SharedSegments shared_segments(const Topology& topology, const std::string& src, const std::string& dst);

/// Up to k paths, node-disjoint apart from the shared segments, found by
/// repeated shortest-path with used interior nodes (and used non-shared
/// links) removed. Ordered by cost.
std::vector<Path> disjoint_paths(const Topology& topology, const LinkStateDB& db, const std::string& src,
                                 const std::string& dst, std::size_t k, const RouteCostParams& params = {},
                                 const RouteConstraints& constraints = {});

/// A sealed routing message ready for the wire.
struct OutgoingMessage {
  std::string link;
  std::string to;
  Q3PMessage msg;
};

/// Per-node link-state agent: owns the node's database, originates LSAs for
/// incident links and floods new ones to every neighbor except the one they
/// came from.
class RoutingAgent {
 public:
  RoutingAgent(std::string node, const Topology& topology, std::uint64_t auth_reserve = kDefaultAuthReserveBytes);

  const std::string& node() const { return node_; }
  LinkStateDB& db() { return db_; }
  const LinkStateDB& db() const { return db_; }

  // New own advertisement for an incident link (seq bumped, queued).
  const Lsa& originate(const std::string& link, bool up, std::uint64_t level, double rate_bps, double now);
  const Lsa* last_originated(const std::string& link) const;

  // Installs a received advertisement; if fresh, queues it for every
  // neighbor except `from_link`. Returns whether it was fresh.
  bool receive(const Lsa& lsa, const std::string& from_link);

  // Queues the current copy of (link, origin) for one neighbor again.
  void resend(const std::string& link, const std::string& origin, const std::string& via_link);
  // Queues the whole database for one neighbor, e.g. when the link to it comes up.
  void sync(const std::string& via_link);

  // Seals one auth-only message per (pending LSA, neighbor). Neighbors
  // whose store cannot pay for the tag, or whose link is listed in
  // `unreachable_links`, stay pending for the next period.
  std::vector<OutgoingMessage> flood_lsas(std::map<std::string, Q3PEndpoint>& endpoints, double now,
                                          const std::set<std::string>& unreachable_links = {});

  std::size_t pending() const { return pending_.size(); }

 private:
  struct Pending {
    std::pair<std::string, std::string> key;  // (link, origin)
    std::uint64_t seq;
    std::string via_link;
  };

  std::string node_;
  const Topology* topology_;
  LinkStateDB db_;
  std::map<std::string, std::uint64_t> own_seq_;
  std::deque<Pending> pending_;
};

}  // namespace qkdnet
