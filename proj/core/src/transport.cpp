#include "qkdnet/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qkdnet {

void KeyDeliveryRequest::check() const {
  if (n_bytes == 0) throw Error(Errc::InvalidArgument, "request " + std::to_string(id) + " asks for zero bytes");
  if (multipath == 0) throw Error(Errc::InvalidArgument, "request " + std::to_string(id) + " allows zero paths");
  if (src == dst) throw Error(Errc::InvalidArgument, "request " + std::to_string(id) + " has src == dst");
}

const char* to_string(DeliveryStatus s) noexcept {
  switch (s) {
    case DeliveryStatus::Delivered: return "Delivered";
    case DeliveryStatus::Partial: return "Partial";
    case DeliveryStatus::Failed: return "Failed";
  }
  return "?";
}

Bytes encode_segment_header(const TransportSegment& segment) {
  if (segment.fragment.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::InvalidArgument, "fragment too long");
  }
  ByteWriter w;
  w.put_u64(segment.request_id);
  w.put_u32(segment.seq);
  w.put_u32(segment.total);
  w.put_u16(static_cast<std::uint16_t>(segment.fragment.size()));
  return std::move(w).bytes();
}

Bytes encode_segment(const TransportSegment& segment) {
  Bytes out = encode_segment_header(segment);
  out.insert(out.end(), segment.fragment.begin(), segment.fragment.end());
  return out;
}

TransportSegment decode_segment(ByteView payload) {
  ByteReader r(payload);
  TransportSegment s;
  s.request_id = r.get_u64();
  s.seq = r.get_u32();
  s.total = r.get_u32();
  const std::uint16_t len = r.get_u16();
  ByteView frag = r.get_bytes(len);
  s.fragment.assign(frag.begin(), frag.end());
  if (r.remaining() != 0) throw Error(Errc::ParseError, "trailing bytes after segment");
  if (s.total == 0 || s.seq >= s.total) throw Error(Errc::ParseError, "segment index out of range");
  return s;
}

Q3PMessage seal_segment(Q3PEndpoint& out, const TransportSegment& segment, double now) {
  return out.seal(Channel::Transport, encode_segment_header(segment), segment.fragment, {true, true}, now);
}

TransportSegment open_segment(Q3PEndpoint& in, const Q3PMessage& msg, double now) {
  if (msg.channel != Channel::Transport) throw Error(Errc::InvalidArgument, "not a transport message");
  return decode_segment(in.open(msg, now));
}

RelayResult relay_hop(const Q3PMessage& inbound, Q3PEndpoint& in, Q3PEndpoint& out, double now) {
  TransportSegment seg = open_segment(in, inbound, now);
  PlaintextExposure exposure{now, in.local(), seg.request_id, seg.seq, seg.fragment.size()};
  if (!out.can_seal(seg.fragment.size(), {true, true})) {
    throw Error(Errc::KeyExhausted, "outbound link '" + out.link_id() + "' cannot carry " +
                                        std::to_string(seg.fragment.size()) + " bytes");
  }
  Q3PMessage fwd = seal_segment(out, seg, now);
  return RelayResult{std::move(seg), std::move(fwd), std::move(exposure)};
}

std::vector<std::uint64_t> fragment_sizes(std::uint64_t n_bytes, std::size_t mtu) {
  if (mtu == 0) throw Error(Errc::InvalidArgument, "mtu must be positive");
  std::vector<std::uint64_t> out;
  for (std::uint64_t left = n_bytes; left > 0;) {
    const std::uint64_t take = std::min<std::uint64_t>(left, mtu);
    out.push_back(take);
    left -= take;
  }
  return out;
}

std::vector<std::uint64_t> proportional_split(std::uint64_t count, const std::vector<std::uint64_t>& weights) {
  std::vector<std::uint64_t> out(weights.size(), 0);
  if (weights.empty()) return out;
  long double total = 0;
  for (auto w : weights) total += static_cast<long double>(w);
  std::vector<long double> quota(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    quota[i] = total > 0 ? static_cast<long double>(count) * static_cast<long double>(weights[i]) / total
                         : static_cast<long double>(count) / static_cast<long double>(weights.size());
  }
  std::uint64_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = static_cast<std::uint64_t>(std::floor(quota[i]));
    given += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return quota[x] - std::floor(quota[x]) > quota[y] - std::floor(quota[y]);
  });
  for (std::size_t i = 0; given < count; i = (i + 1) % order.size(), ++given) ++out[order[i]];
  return out;
}

std::uint64_t bottleneck_level(const Path& path, const LinkStateDB& db, const Topology& topology,
                               const SharedSegments& shared) {
  std::optional<std::uint64_t> inner, all;
  for (const auto& id : path.links) {
    const std::uint64_t level = db.min_level(topology.link(id), topology).value_or(0);
    all = std::min(all.value_or(level), level);
    if (!shared.links.count(id)) inner = std::min(inner.value_or(level), level);
  }
  return inner ? *inner : all.value_or(0);
}

double aggregate_rate(const Topology& topology, const LinkStateDB& db, const std::string& src, const std::string& dst,
                      std::size_t k, const RouteCostParams& params) {
  std::vector<Path> paths;
  try {
    paths = disjoint_paths(topology, db, src, dst, k, params);
  } catch (const Error& e) {
    if (e.code() != Errc::NoRoute) throw;
  }
  if (paths.empty()) return 0.0;
  const SharedSegments shared = shared_segments(topology, src, dst);
  double parallel = 0.0;
  double shared_cap = std::numeric_limits<double>::infinity();
  bool any_inner = false;
  for (const Path& p : paths) {
    double path_min = std::numeric_limits<double>::infinity();
    for (const auto& id : p.links) {
      const double r = db.rate_bps(topology.link(id), topology);
      if (shared.links.count(id)) {
        shared_cap = std::min(shared_cap, r);
      } else {
        path_min = std::min(path_min, r);
      }
    }
    if (std::isfinite(path_min)) {
      parallel += path_min;
      any_inner = true;
    }
  }
  if (!any_inner) return shared_cap;
  return std::min(parallel, shared_cap);
}

}  // namespace qkdnet
