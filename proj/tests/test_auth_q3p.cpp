#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "qkdnet/auth.hpp"
#include "qkdnet/error.hpp"
#include "qkdnet/q3p.hpp"
#include "qkdnet/random.hpp"

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

struct Pair {
  Q3PEndpoint a;
  Q3PEndpoint b;
};

Pair make_pair(std::uint64_t seed, std::size_t preshared = 16384) {
  Rng r(seed);
  const Bytes init = r.bytes(preshared);
  return Pair{Q3PEndpoint("L", "A", "B", true, init), Q3PEndpoint("L", "B", "A", false, init)};
}

}  // namespace

TEST_CASE("GF(2^128) multiply agrees with the schoolbook oracle") {
  Rng r(17);
  for (int i = 0; i < 300; ++i) {
    Gf128 x{r.next_u64(), r.next_u64()}, y{r.next_u64(), r.next_u64()};
    auto o = oracle::gf_mul({x.hi, x.lo}, {y.hi, y.lo});
    Gf128 z = gf128_mul(x, y);
    CHECK(z.hi == o.hi);
    CHECK(z.lo == o.lo);
  }
  Gf128 one{0, 1};
  Gf128 x{0x0123456789abcdefULL, 0xfedcba9876543210ULL};
  CHECK(gf128_mul(x, one) == x);
  CHECK(gf128_mul(one, x) == x);
}

TEST_CASE("poly tag: Horner over padded blocks plus a length block") {
  Rng r(3);
  for (std::size_t len : {0u, 1u, 15u, 16u, 17u, 100u}) {
    const Bytes key = r.bytes(32);
    const Bytes msg = r.bytes(len);
    // Reference evaluation with the oracle multiply.
    auto load = [](const std::uint8_t* p) {
      oracle::U128 v;
      for (int i = 0; i < 8; ++i) v.hi = (v.hi << 8) | p[i];
      for (int i = 8; i < 16; ++i) v.lo = (v.lo << 8) | p[i];
      return v;
    };
    const oracle::U128 h = load(key.data());
    const oracle::U128 m = load(key.data() + 16);
    oracle::U128 y;
    for (std::size_t off = 0; off < len; off += 16) {
      std::uint8_t block[16] = {};
      std::copy_n(msg.begin() + static_cast<std::ptrdiff_t>(off), std::min<std::size_t>(16, len - off), block);
      const auto bv = load(block);
      y = oracle::gf_mul({y.hi ^ bv.hi, y.lo ^ bv.lo}, h);
    }
    y = oracle::gf_mul({y.hi, y.lo ^ (len * 8)}, h);
    y = {y.hi ^ m.hi, y.lo ^ m.lo};
    const Tag t = poly_tag(key, msg);
    oracle::U128 got = load(t.data());
    CHECK(got.hi == y.hi);
    CHECK(got.lo == y.lo);
  }
  CHECK(code_of([] { poly_tag(Bytes(31), Bytes(4)); }) == Errc::LengthMismatch);
}

TEST_CASE("one-time pad helpers enforce length, purpose and single use") {
  Rng r(8);
  KeyStore s("L", r.bytes(8192), 0);
  Reservation pad = s.reserve(4, KeyPurpose::Encrypt);
  CHECK(code_of([&] { otp_encrypt(pad, Bytes(5)); }) == Errc::LengthMismatch);
  Bytes ct = otp_encrypt(pad, Bytes{1, 2, 3, 4});
  CHECK(code_of([&] { otp_encrypt(pad, Bytes{1, 2, 3, 4}); }) == Errc::ReservationConsumed);
  Reservation mac = s.reserve(32, KeyPurpose::Authenticate);
  CHECK(code_of([&] { otp_encrypt(mac, Bytes(32)); }) == Errc::InvalidArgument);
  CHECK(xor_bytes(Bytes{0xff, 0x00}, Bytes{0x0f, 0xf0}) == Bytes{0xf0, 0xf0});
  CHECK(ct.size() == 4);
}

TEST_CASE("seal and open round trip with encryption and authentication") {
  Pair p = make_pair(1, 1 << 17);
  Rng r(2);
  for (int i = 0; i < 50; ++i) {
    const Bytes clear = r.bytes(r.next_u64() % 20);
    const Bytes secret = r.bytes(1 + r.next_u64() % 1024);
    const std::uint64_t before = p.a.tx().available();
    Q3PMessage m = p.a.seal(Channel::Transport, clear, secret, {true, true});
    CHECK(before - p.a.tx().available() == secret.size() + 32);
    CHECK(m.key_cost() == secret.size() + 32);
    CHECK(m.payload.size() == clear.size() + secret.size());
    Bytes out = p.b.open(m);
    Bytes expect = clear;
    expect.insert(expect.end(), secret.begin(), secret.end());
    CHECK(out == expect);
  }
  // Directional streams: B's replica of A's stream mirrors A's transmit store.
  CHECK(p.b.rx().cursor() == p.a.tx().cursor());
  CHECK(p.b.tx().cursor() == 0);
}

TEST_CASE("both directions run concurrently without sharing key bytes") {
  Pair p = make_pair(5);
  Q3PMessage ab = p.a.seal(Channel::Routing, Bytes{1, 2, 3}, {false, true});
  Q3PMessage ba = p.b.seal(Channel::Routing, Bytes{4, 5, 6}, {false, true});
  CHECK(p.b.open(ab) == Bytes{1, 2, 3});
  CHECK(p.a.open(ba) == Bytes{4, 5, 6});
  CHECK(ab.auth_range == ba.auth_range);  // same indices, different streams
  CHECK(ab.tag != ba.tag);
}

TEST_CASE("wire frame encodes and decodes") {
  Pair p = make_pair(3);
  Q3PMessage m = p.a.seal(Channel::Control, Bytes{9, 8, 7}, {false, true});
  Bytes frame = encode_frame(m);
  CHECK(frame.size() == kQ3pHeaderBytes + 3 + kTagBytes);
  CHECK(frame[0] == 0x51);
  CHECK(frame[4] == kQ3pVersion);
  CHECK(frame[5] == static_cast<std::uint8_t>(Channel::Control));
  CHECK(frame[6] == kFlagAuthenticated);
  Q3PMessage d = decode_frame(frame);
  CHECK(d.payload == m.payload);
  CHECK(d.tag == m.tag);
  CHECK(d.msg_id == m.msg_id);
  CHECK_FALSE(d.auth_range.has_value());

  Bytes bad = frame;
  bad[0] ^= 1;
  CHECK(code_of([&] { decode_frame(bad); }) == Errc::ParseError);
  bad = frame;
  bad[5] = 9;
  CHECK(code_of([&] { decode_frame(bad); }) == Errc::ParseError);
  bad = frame;
  bad.push_back(0);
  CHECK(code_of([&] { decode_frame(bad); }) == Errc::ParseError);
  bad = frame;
  bad.resize(10);
  CHECK(code_of([&] { decode_frame(bad); }) == Errc::ParseError);
}

TEST_CASE("replayed and tampered messages are refused") {
  Pair p = make_pair(4);
  Q3PMessage m1 = p.a.seal(Channel::Routing, Bytes{1}, {false, true});
  Q3PMessage m2 = p.a.seal(Channel::Routing, Bytes{2}, {false, true});
  p.b.open(m1);
  CHECK(code_of([&] { p.b.open(m1); }) == Errc::ReplayDetected);
  Q3PMessage t = m2;
  t.payload[0] ^= 0x40;
  CHECK(code_of([&] { p.b.open(t); }) == Errc::TagMismatch);
  // The key behind a failed tag is burnt; a genuine retransmission uses a new range.
  Q3PMessage m3 = p.a.seal(Channel::Routing, Bytes{2}, {false, true});
  CHECK(p.b.open(m3) == Bytes{2});
  CHECK(m3.auth_range->begin >= m2.auth_range->end);
  CHECK(p.b.rx().ledger().exclusive());
}

TEST_CASE("sealing without enough key leaves the store untouched") {
  Pair p = make_pair(6, 8192 * 2);
  const std::uint64_t avail = p.a.tx().available();  // 8192
  CHECK_FALSE(p.a.can_seal(avail - 4096 + 1, {true, true}));
  CHECK(code_of([&] { p.a.seal(Channel::Transport, Bytes(avail - 4096 + 1), {true, true}); }) ==
        Errc::InsufficientKey);
  CHECK(p.a.tx().available() == avail);
  CHECK(p.a.can_seal(avail - 4096, {true, true}));
}

TEST_CASE("pushed blocks split into the two directional streams") {
  Pair p = make_pair(7, 8192);
  const std::uint64_t la = p.a.level(), lb = p.b.level();
  KeyBlock blk{1, Bytes(101, 0x5a), "L"};
  p.a.push_key(blk);
  p.b.push_key(blk);
  CHECK(p.a.level() == la + 101);
  CHECK(p.b.level() == lb + 101);
  CHECK(p.a.tx().pushed_bytes() == 51);
  CHECK(p.b.rx().pushed_bytes() == 51);
  CHECK(p.a.rx().pushed_bytes() == 50);
  CHECK(code_of([&] { p.a.push_key(blk); }) == Errc::OutOfOrderBlock);
  CHECK(forward_half(blk.bytes).size() + reverse_half(blk.bytes).size() == 101);
}

TEST_CASE("single-bit flips never forge a tag") {
  Pair p = make_pair(8, 1 << 20);
  Rng r(99);
  int accepted = 0;
  for (int i = 0; i < 500; ++i) {
    Q3PMessage m = p.a.seal(Channel::Transport, r.bytes(8), r.bytes(24), {true, true});
    const std::size_t bits = (m.payload.size() + kTagBytes) * 8;
    const std::size_t bit = r.next_u64() % bits;
    if (bit < m.payload.size() * 8) {
      m.payload[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    } else {
      const std::size_t tb = bit - m.payload.size() * 8;
      m.tag[tb / 8] ^= static_cast<std::uint8_t>(1u << (tb % 8));
    }
    try {
      p.b.open(m);
      ++accepted;
    } catch (const Error& e) {
      CHECK(e.code() == Errc::TagMismatch);
    }
  }
  CHECK(accepted == 0);
}
