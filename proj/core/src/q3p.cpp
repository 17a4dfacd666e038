#include "qkdnet/q3p.hpp"

#include "qkdnet/error.hpp"

namespace qkdnet {

std::uint64_t Q3PMessage::key_cost() const {
  return (enc_range ? enc_range->size() : 0) + (auth_range ? auth_range->size() : 0);
}

namespace {

ByteWriter header(const Q3PMessage& msg) {
  ByteWriter w;
  w.put_u32(kQ3pMagic);
  w.put_u8(kQ3pVersion);
  w.put_u8(static_cast<std::uint8_t>(msg.channel));
  w.put_u8(static_cast<std::uint8_t>((msg.encrypted ? kFlagEncrypted : 0) |
                                     (msg.authenticated ? kFlagAuthenticated : 0)));
  w.put_u64(msg.msg_id);
  w.put_u32(static_cast<std::uint32_t>(msg.payload.size()));
  return w;
}

std::size_t channel_index(Channel ch) { return static_cast<std::size_t>(ch); }

}  // namespace

Bytes authenticated_bytes(const Q3PMessage& msg) {
  ByteWriter w = header(msg);
  w.put_bytes(msg.payload);
  return std::move(w).bytes();
}

Bytes encode_frame(const Q3PMessage& msg) {
  ByteWriter w = header(msg);
  w.put_bytes(msg.payload);
  if (msg.authenticated) w.put_bytes(msg.tag);
  return std::move(w).bytes();
}

Q3PMessage decode_frame(ByteView frame) {
  ByteReader r(frame);
  if (r.get_u32() != kQ3pMagic) throw Error(Errc::ParseError, "bad Q3P magic");
  if (r.get_u8() != kQ3pVersion) throw Error(Errc::ParseError, "unsupported Q3P version");
  Q3PMessage msg;
  std::uint8_t ch = r.get_u8();
  if (ch >= kChannelCount) throw Error(Errc::ParseError, "unknown Q3P channel " + std::to_string(ch));
  msg.channel = static_cast<Channel>(ch);
  std::uint8_t flags = r.get_u8();
  if (flags & ~(kFlagEncrypted | kFlagAuthenticated)) throw Error(Errc::ParseError, "unknown Q3P flags");
  msg.encrypted = flags & kFlagEncrypted;
  msg.authenticated = flags & kFlagAuthenticated;
  msg.msg_id = r.get_u64();
  std::uint32_t len = r.get_u32();
  ByteView payload = r.get_bytes(len);
  msg.payload.assign(payload.begin(), payload.end());
  if (msg.authenticated) {
    ByteView tag = r.get_bytes(kTagBytes);
    std::copy(tag.begin(), tag.end(), msg.tag.begin());
  }
  if (r.remaining() != 0) throw Error(Errc::ParseError, "trailing bytes after Q3P frame");
  return msg;
}

ByteView forward_half(ByteView bytes) { return bytes.first((bytes.size() + 1) / 2); }
ByteView reverse_half(ByteView bytes) { return bytes.subspan((bytes.size() + 1) / 2); }

Q3PEndpoint::Q3PEndpoint(std::string link_id, std::string local, std::string peer, bool local_is_a,
                         ByteView preshared, std::uint64_t auth_reserve)
    : link_id_(link_id),
      local_(std::move(local)),
      peer_(std::move(peer)),
      local_is_a_(local_is_a),
      tx_(link_id, local_is_a ? forward_half(preshared) : reverse_half(preshared), auth_reserve),
      rx_(link_id, local_is_a ? reverse_half(preshared) : forward_half(preshared), auth_reserve) {}

std::uint64_t Q3PEndpoint::push_key(const KeyBlock& block) {
  if (block.id <= last_block_id_) {
    throw Error(Errc::OutOfOrderBlock, "block " + std::to_string(block.id) + " on link '" + link_id_ +
                                           "' is not newer than " + std::to_string(last_block_id_));
  }
  last_block_id_ = block.id;
  ByteView fwd = forward_half(block.bytes);
  ByteView rev = reverse_half(block.bytes);
  ByteView mine = local_is_a_ ? fwd : rev;
  ByteView theirs = local_is_a_ ? rev : fwd;
  if (!mine.empty()) tx_.push_key({block.id, Bytes(mine.begin(), mine.end()), block.origin_link});
  if (!theirs.empty()) rx_.push_key({block.id, Bytes(theirs.begin(), theirs.end()), block.origin_link});
  return level();
}

bool Q3PEndpoint::can_seal(std::uint64_t secret_bytes, SealFlags flags) const {
  const std::uint64_t avail = tx_.available();
  std::uint64_t enc = flags.encrypt ? secret_bytes : 0;
  if (flags.encrypt && enc > 0 && !tx_.can_reserve(enc, KeyPurpose::Encrypt)) return false;
  if (flags.authenticate && avail - enc < kAuthKeyBytes) return false;
  return true;
}

Q3PMessage Q3PEndpoint::seal(Channel channel, ByteView clear, ByteView secret, SealFlags flags, double now) {
  if (!can_seal(secret.size(), flags)) {
    throw Error(Errc::InsufficientKey, "link '" + link_id_ + "' at " + local_ + " holds " +
                                           std::to_string(tx_.available()) + " bytes; cannot seal " +
                                           std::to_string(secret.size()) + "+" +
                                           std::to_string(flags.authenticate ? kAuthKeyBytes : 0));
  }
  Q3PMessage msg;
  msg.channel = channel;
  msg.msg_id = ++next_msg_id_[channel_index(channel)];
  msg.encrypted = flags.encrypt && !secret.empty();
  msg.authenticated = flags.authenticate;
  LedgerTag tag{channel, msg.msg_id, now};

  msg.payload.assign(clear.begin(), clear.end());
  if (msg.encrypted) {
    Reservation pad = tx_.reserve(secret.size(), KeyPurpose::Encrypt, tag);
    msg.enc_range = pad.range();
    Bytes cipher = otp_encrypt(pad, secret);
    msg.payload.insert(msg.payload.end(), cipher.begin(), cipher.end());
  } else {
    msg.payload.insert(msg.payload.end(), secret.begin(), secret.end());
  }
  if (msg.authenticated) {
    Reservation mac = tx_.reserve(kAuthKeyBytes, KeyPurpose::Authenticate, tag);
    msg.auth_range = mac.range();
    msg.tag = authenticate(authenticated_bytes(msg), mac);
  }
  return msg;
}

Bytes Q3PEndpoint::open(const Q3PMessage& msg, double now) {
  std::uint64_t& last = last_seen_id_[channel_index(msg.channel)];
  if (msg.msg_id <= last) {
    throw Error(Errc::ReplayDetected, "msg_id " + std::to_string(msg.msg_id) + " on " + to_string(msg.channel) +
                                          " channel of '" + link_id_ + "' not above " + std::to_string(last));
  }
  if (msg.encrypted != msg.enc_range.has_value() || msg.authenticated != msg.auth_range.has_value()) {
    throw Error(Errc::InvalidArgument, "message flags disagree with its key ranges");
  }
  if (msg.enc_range && msg.enc_range->size() > msg.payload.size()) {
    throw Error(Errc::LengthMismatch, "encrypted range longer than payload");
  }

  LedgerTag tag{msg.channel, msg.msg_id, now};
  std::optional<Reservation> pad;
  if (msg.enc_range) pad.emplace(rx_.reserve_mirror(*msg.enc_range, KeyPurpose::Encrypt, tag));
  if (msg.auth_range) {
    if (msg.auth_range->size() != kAuthKeyBytes) throw Error(Errc::LengthMismatch, "authentication range size");
    Reservation mac = rx_.reserve_mirror(*msg.auth_range, KeyPurpose::Authenticate, tag);
    if (!verify(authenticated_bytes(msg), msg.tag, mac)) {
      throw Error(Errc::TagMismatch, "tag check failed for msg_id " + std::to_string(msg.msg_id) + " on '" +
                                         link_id_ + "'");
    }
  }
  last = msg.msg_id;

  if (!pad) return msg.payload;
  const std::size_t clear_len = msg.payload.size() - pad->size();
  Bytes out(msg.payload.begin(), msg.payload.begin() + static_cast<std::ptrdiff_t>(clear_len));
  Bytes plain = otp_decrypt(*pad, ByteView(msg.payload).subspan(clear_len));
  out.insert(out.end(), plain.begin(), plain.end());
  return out;
}

}  // namespace qkdnet
