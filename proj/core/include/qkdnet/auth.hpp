#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "qkdnet/bytes.hpp"
#include "qkdnet/key_store.hpp"

namespace qkdnet {

inline constexpr std::size_t kTagBytes = 16;
inline constexpr std::size_t kAuthKeyBytes = 32;

using Tag = std::array<std::uint8_t, kTagBytes>;

/// Element of GF(2^128) modulo x^128 + x^7 + x^2 + x + 1; bit i of the
/// (hi:lo) pair is the coefficient of x^i. Byte strings map big-endian.
struct Gf128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  static Gf128 from_bytes(ByteView sixteen);
  friend Gf128 operator^(Gf128 a, Gf128 b) { return {a.hi ^ b.hi, a.lo ^ b.lo}; }
  friend bool operator==(const Gf128&, const Gf128&) = default;
};

Gf128 gf128_mul(Gf128 a, Gf128 b) noexcept;

/// Wegman-Carter tag. key[0..16) is the hash point H, key[16..32) the
/// one-time mask M. The message is split into 16-byte blocks (last one
/// zero-padded) followed by a block holding the bit length; the tag is
/// Horner's evaluation y <- (y ^ block) * H over all blocks, then y ^ M.
/// A forgery succeeds with probability at most (blocks + 1) / 2^128.
Tag poly_tag(ByteView key, ByteView message);

Bytes xor_bytes(ByteView key, ByteView data);

// Errc::LengthMismatch, Errc::ReservationConsumed, Errc::InvalidArgument
// (wrong purpose).
Bytes otp_encrypt(Reservation& reservation, ByteView plaintext);
Bytes otp_decrypt(Reservation& reservation, ByteView ciphertext);

Tag authenticate(ByteView message, Reservation& reservation);
bool verify(ByteView message, const Tag& tag, Reservation& reservation);

}  // namespace qkdnet
