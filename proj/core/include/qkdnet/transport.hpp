#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/bytes.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/q3p.hpp"
#include "qkdnet/routing.hpp"

namespace qkdnet {

inline constexpr std::size_t kMtu = 1024;
inline constexpr int kMaxRetransmissions = 5;
inline constexpr std::size_t kSegmentHeaderBytes = 8 + 4 + 4 + 2;
// Per-hop key cost of one segment on top of its fragment: 16 bytes of
// hash key and 16 bytes of tag mask.
inline constexpr std::uint64_t kHopOverheadBytes = kAuthKeyBytes;

struct KeyDeliveryRequest {
  std::uint64_t id = 0;
  std::string src;
  std::string dst;
  std::uint64_t n_bytes = 0;
  std::size_t multipath = 1;
  std::optional<double> deadline_s;
  std::set<std::string> excluded_links;

  // Errc::InvalidArgument on n_bytes == 0, k == 0 or src == dst.
  void check() const;
};

/// One MTU-sized piece of an end-to-end secret. The header travels in the
/// clear (authenticated); only the fragment is one-time-pad encrypted.
struct TransportSegment {
  std::uint64_t request_id = 0;
  std::uint32_t seq = 0;
  std::uint32_t total = 0;
  Bytes fragment;
  std::vector<std::string> path;  // remaining hops, holder first; not on the wire

  friend bool operator==(const TransportSegment& x, const TransportSegment& y) {
    return x.request_id == y.request_id && x.seq == y.seq && x.total == y.total && x.fragment == y.fragment;
  }
};

// Big-endian u64 request-id, u32 seq, u32 total, u16 fragment length.
Bytes encode_segment_header(const TransportSegment& segment);
Bytes encode_segment(const TransportSegment& segment);
TransportSegment decode_segment(ByteView payload);

// Seals a segment for one hop (encrypt + authenticate) and opens it again.
Q3PMessage seal_segment(Q3PEndpoint& out, const TransportSegment& segment, double now = 0.0);
TransportSegment open_segment(Q3PEndpoint& in, const Q3PMessage& msg, double now = 0.0);

enum class DeliveryStatus { Delivered, Partial, Failed };
const char* to_string(DeliveryStatus s) noexcept;

struct DeliveryRecord {
  std::uint64_t request_id = 0;
  std::string src;
  std::string dst;
  std::uint64_t n_bytes = 0;
  double submitted_s = 0.0;
  Bytes secret_at_src;
  Bytes secret_at_dst;
  std::map<std::string, std::uint64_t> consumption;  // link -> fragment + tag bytes sent
  std::vector<Path> paths_used;
  std::optional<double> completion_s;
  DeliveryStatus status = DeliveryStatus::Failed;
  std::optional<Errc> failure;
  std::uint32_t segments = 0;
  std::uint32_t delivered_segments = 0;
  std::uint32_t failed_segments = 0;
  std::uint64_t transmissions = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t reroutes = 0;

  bool finished() const { return delivered_segments + failed_segments == segments; }
};

/// A relayed fragment existed in plaintext inside a trusted node.
struct PlaintextExposure {
  double time_s = 0.0;
  std::string node;
  std::uint64_t request_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t bytes = 0;
};

struct RelayResult {
  TransportSegment segment;
  Q3PMessage forwarded;
  PlaintextExposure exposure;
};

// Opens `inbound` on the node's inbound endpoint and re-seals it with a
// fresh reservation on the outbound one. TagMismatch propagates; an
// outbound store that cannot pay raises Errc::KeyExhausted.
RelayResult relay_hop(const Q3PMessage& inbound, Q3PEndpoint& in, Q3PEndpoint& out, double now = 0.0);

// Fragment sizes for n bytes: full MTUs and a shorter tail.
std::vector<std::uint64_t> fragment_sizes(std::uint64_t n_bytes, std::size_t mtu = kMtu);

// Largest-remainder apportionment of `count` items by `weights`; ties go to
// the lower index. All-zero weights split evenly.
std::vector<std::uint64_t> proportional_split(std::uint64_t count, const std::vector<std::uint64_t>& weights);

// Smallest advertised level over the path's links that are not shared by
// every path (the end users' access links); falls back to all links.
std::uint64_t bottleneck_level(const Path& path, const LinkStateDB& db, const Topology& topology,
                               const SharedSegments& shared);

/// Series-parallel rate of the k disjoint src->dst paths: each path is
/// limited by its slowest non-shared link, the paths add up, and the shared
/// access links cap the sum.
double aggregate_rate(const Topology& topology, const LinkStateDB& db, const std::string& src, const std::string& dst,
                      std::size_t k, const RouteCostParams& params = {});

}  // namespace qkdnet
