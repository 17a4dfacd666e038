#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "qkdnet/auth.hpp"
#include "qkdnet/bytes.hpp"
#include "qkdnet/key_store.hpp"

namespace qkdnet {

inline constexpr std::uint32_t kQ3pMagic = 0x51335021;  // "Q3P!"
inline constexpr std::uint8_t kQ3pVersion = 1;
inline constexpr std::uint8_t kFlagEncrypted = 0x01;
inline constexpr std::uint8_t kFlagAuthenticated = 0x02;
inline constexpr std::size_t kQ3pHeaderBytes = 4 + 1 + 1 + 1 + 8 + 4;

struct SealFlags {
  bool encrypt = false;
  bool authenticate = true;
};

/// A sealed point-to-point message. The key ranges are not part of the wire
/// frame; they travel alongside it so the receiver can commit the mirrored
/// bytes of its replica store.
struct Q3PMessage {
  std::uint64_t msg_id = 0;
  Channel channel = Channel::Control;
  bool encrypted = false;
  bool authenticated = false;
  Bytes payload;  // clear prefix followed by `enc_range->size()` encrypted bytes
  Tag tag{};
  std::optional<KeyRange> enc_range;
  std::optional<KeyRange> auth_range;

  // Key bytes this message spent at each endpoint.
  std::uint64_t key_cost() const;
};

// Big-endian: magic u32, version u8, channel u8, flags u8, msg_id u64,
// payload_len u32, payload, 16-byte tag when authenticated.
Bytes encode_frame(const Q3PMessage& msg);
// Key ranges are left empty. Errc::ParseError on malformed frames.
Q3PMessage decode_frame(ByteView frame);
// The header+payload bytes covered by the tag.
Bytes authenticated_bytes(const Q3PMessage& msg);

/// One end of a Q3P link. Link key is split into two directional streams:
/// the first ceil(n/2) bytes of every block feed a->b, the rest b->a. Each
/// end holds its sending stream (tx) and a replica of the peer's (rx), so
/// the two ends never allocate from the same bytes.
class Q3PEndpoint {
 public:
  Q3PEndpoint(std::string link_id, std::string local, std::string peer, bool local_is_a, ByteView preshared,
              std::uint64_t auth_reserve = kDefaultAuthReserveBytes);

  const std::string& link_id() const { return link_id_; }
  const std::string& local() const { return local_; }
  const std::string& peer() const { return peer_; }

  // Splits the block into its two directional halves. Returns level().
  std::uint64_t push_key(const KeyBlock& block);

  // Seals `clear` (authenticated only) followed by `secret` (one-time-pad
  // encrypted when flags.encrypt). Consumes |secret| + 32 bytes of tx key
  // for encrypt+auth. Errc::InsufficientKey leaves the store untouched.
  Q3PMessage seal(Channel channel, ByteView clear, ByteView secret, SealFlags flags, double now = 0.0);
  Q3PMessage seal(Channel channel, ByteView payload, SealFlags flags, double now = 0.0) {
    return seal(channel, {}, payload, flags, now);
  }

  // Checks msg_id freshness, commits the mirrored key, verifies and
  // decrypts. Errc::ReplayDetected, Errc::TagMismatch, Errc::KeyReuse.
  Bytes open(const Q3PMessage& msg, double now = 0.0);

  bool can_seal(std::uint64_t secret_bytes, SealFlags flags) const;

  KeyStore& tx() { return tx_; }
  const KeyStore& tx() const { return tx_; }
  KeyStore& rx() { return rx_; }
  const KeyStore& rx() const { return rx_; }

  // Key held at this end across both directions.
  std::uint64_t level() const { return tx_.available() + rx_.available(); }
  std::uint64_t last_block_id() const { return last_block_id_; }

 private:
  std::string link_id_;
  std::string local_;
  std::string peer_;
  bool local_is_a_;
  KeyStore tx_;
  KeyStore rx_;
  std::uint64_t last_block_id_ = 0;
  std::array<std::uint64_t, kChannelCount> next_msg_id_{};
  std::array<std::uint64_t, kChannelCount> last_seen_id_{};
};

// Split helpers shared with tests: the a->b and b->a portions of a block.
ByteView forward_half(ByteView bytes);
ByteView reverse_half(ByteView bytes);

}  // namespace qkdnet
