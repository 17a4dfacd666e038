#include "qkdnet/auth.hpp"

#include <string>

#include "qkdnet/error.hpp"

namespace qkdnet {

Gf128 Gf128::from_bytes(ByteView sixteen) {
  Gf128 out;
  for (int i = 0; i < 8; ++i) out.hi = (out.hi << 8) | sixteen[static_cast<std::size_t>(i)];
  for (int i = 8; i < 16; ++i) out.lo = (out.lo << 8) | sixteen[static_cast<std::size_t>(i)];
  return out;
}

Gf128 gf128_mul(Gf128 a, Gf128 b) noexcept {
  Gf128 acc;
  for (int i = 0; i < 128; ++i) {
    std::uint64_t bit = i < 64 ? (b.lo >> i) & 1u : (b.hi >> (i - 64)) & 1u;
    if (bit) acc = acc ^ a;
    std::uint64_t carry = a.hi >> 63;
    a.hi = (a.hi << 1) | (a.lo >> 63);
    a.lo <<= 1;
    if (carry) a.lo ^= 0x87;
  }
  return acc;
}

Tag poly_tag(ByteView key, ByteView message) {
  if (key.size() != kAuthKeyBytes) {
    throw Error(Errc::LengthMismatch, "authentication key must be " + std::to_string(kAuthKeyBytes) + " bytes");
  }
  const Gf128 h = Gf128::from_bytes(key.first(16));
  const Gf128 mask = Gf128::from_bytes(key.subspan(16, 16));

  Gf128 y;
  std::array<std::uint8_t, 16> block{};
  for (std::size_t off = 0; off < message.size(); off += 16) {
    block.fill(0);
    std::size_t n = std::min<std::size_t>(16, message.size() - off);
    std::copy_n(message.begin() + static_cast<std::ptrdiff_t>(off), n, block.begin());
    y = gf128_mul(y ^ Gf128::from_bytes(block), h);
  }
  Gf128 length{0, static_cast<std::uint64_t>(message.size()) * 8u};
  y = gf128_mul(y ^ length, h);
  y = y ^ mask;

  Tag tag{};
  for (int i = 0; i < 8; ++i) {
    tag[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(y.hi >> (56 - 8 * i));
    tag[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(y.lo >> (56 - 8 * i));
  }
  return tag;
}

Bytes xor_bytes(ByteView key, ByteView data) {
  if (key.size() != data.size()) {
    throw Error(Errc::LengthMismatch, "pad of " + std::to_string(key.size()) + " bytes for " +
                                          std::to_string(data.size()) + "-byte message");
  }
  Bytes out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i] ^ key[i];
  return out;
}

namespace {

void expect_purpose(const Reservation& r, KeyPurpose want) {
  if (r.purpose() != want) {
    throw Error(Errc::InvalidArgument, std::string("reservation is for ") + to_string(r.purpose()) + ", need " +
                                           to_string(want));
  }
}

}  // namespace

Bytes otp_encrypt(Reservation& reservation, ByteView plaintext) {
  expect_purpose(reservation, KeyPurpose::Encrypt);
  if (reservation.consumed()) {
    throw Error(Errc::ReservationConsumed, "key range already used on link '" + reservation.link_id() + "'");
  }
  if (reservation.size() != plaintext.size()) {
    throw Error(Errc::LengthMismatch, "reservation holds " + std::to_string(reservation.size()) + " bytes for " +
                                          std::to_string(plaintext.size()) + "-byte plaintext");
  }
  return xor_bytes(reservation.take(), plaintext);
}

Bytes otp_decrypt(Reservation& reservation, ByteView ciphertext) { return otp_encrypt(reservation, ciphertext); }

Tag authenticate(ByteView message, Reservation& reservation) {
  expect_purpose(reservation, KeyPurpose::Authenticate);
  if (reservation.size() != kAuthKeyBytes) {
    throw Error(Errc::LengthMismatch, "authentication needs a " + std::to_string(kAuthKeyBytes) + "-byte reservation");
  }
  return poly_tag(reservation.take(), message);
}

bool verify(ByteView message, const Tag& tag, Reservation& reservation) {
  Tag expected = authenticate(message, reservation);
  std::uint8_t diff = 0;
  for (std::size_t i = 0; i < kTagBytes; ++i) diff |= static_cast<std::uint8_t>(expected[i] ^ tag[i]);
  return diff == 0;
}

}  // namespace qkdnet
