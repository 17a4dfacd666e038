#include "qkdnet/key_store.hpp"

#include <algorithm>

#include "qkdnet/error.hpp"

namespace qkdnet {

const char* to_string(Channel ch) noexcept {
  switch (ch) {
    case Channel::Distill: return "distill";
    case Channel::Routing: return "routing";
    case Channel::Transport: return "transport";
    case Channel::Control: return "control";
  }
  return "unknown";
}

const char* to_string(KeyPurpose p) noexcept {
  switch (p) {
    case KeyPurpose::Encrypt: return "encrypt";
    case KeyPurpose::Authenticate: return "authenticate";
    case KeyPurpose::Discard: return "discard";
  }
  return "unknown";
}

void ConsumptionLedger::append(LedgerRecord record) {
  total_ += record.range.size();
  records_.push_back(std::move(record));
}

std::uint64_t ConsumptionLedger::bytes_for(Channel ch) const {
  std::uint64_t n = 0;
  for (const auto& r : records_) {
    if (r.tag.channel == ch) n += r.range.size();
  }
  return n;
}

std::uint64_t ConsumptionLedger::bytes_for(KeyPurpose p) const {
  std::uint64_t n = 0;
  for (const auto& r : records_) {
    if (r.purpose == p) n += r.range.size();
  }
  return n;
}

bool ConsumptionLedger::exclusive() const {
  std::vector<KeyRange> ranges;
  ranges.reserve(records_.size());
  for (const auto& r : records_) ranges.push_back(r.range);
  std::sort(ranges.begin(), ranges.end(), [](const KeyRange& x, const KeyRange& y) { return x.begin < y.begin; });
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].begin < ranges[i - 1].end) return false;
  }
  return true;
}

ByteView Reservation::take() {
  if (consumed_) throw Error(Errc::ReservationConsumed, "key range already used on link '" + link_id_ + "'");
  consumed_ = true;
  return key_;
}

KeyStore::KeyStore(std::string link_id, ByteView initial, std::uint64_t auth_reserve)
    : link_id_(std::move(link_id)),
      auth_reserve_(auth_reserve),
      initial_(initial.size()),
      total_(initial.size()),
      material_(initial.begin(), initial.end()) {}

std::uint64_t KeyStore::push_key(const KeyBlock& block) {
  if (block.id <= last_block_id_) {
    throw Error(Errc::OutOfOrderBlock, "block " + std::to_string(block.id) + " on link '" + link_id_ +
                                           "' is not newer than " + std::to_string(last_block_id_));
  }
  if (block.bytes.empty()) throw Error(Errc::InvalidArgument, "empty key block");
  last_block_id_ = block.id;
  material_.insert(material_.end(), block.bytes.begin(), block.bytes.end());
  total_ += block.bytes.size();
  return available();
}

bool KeyStore::can_reserve(std::uint64_t n_bytes, KeyPurpose purpose) const {
  if (n_bytes == 0 || n_bytes > available()) return false;
  if (purpose == KeyPurpose::Encrypt) return available() - n_bytes >= auth_reserve_;
  return true;
}

Reservation KeyStore::reserve(std::uint64_t n_bytes, KeyPurpose purpose, const LedgerTag& tag) {
  if (n_bytes == 0) throw Error(Errc::InvalidArgument, "reservation size must be positive");
  if (!can_reserve(n_bytes, purpose)) {
    throw Error(Errc::InsufficientKey, "link '" + link_id_ + "' holds " + std::to_string(available()) +
                                           " bytes; cannot reserve " + std::to_string(n_bytes) + " for " +
                                           to_string(purpose) + " (auth reserve " + std::to_string(auth_reserve_) +
                                           ")");
  }
  return commit({cursor_, cursor_ + n_bytes}, purpose, tag);
}

Reservation KeyStore::reserve_mirror(KeyRange range, KeyPurpose purpose, const LedgerTag& tag) {
  if (range.end <= range.begin) throw Error(Errc::InvalidArgument, "empty mirror range");
  if (range.begin < cursor_) {
    throw Error(Errc::KeyReuse, "range [" + std::to_string(range.begin) + "," + std::to_string(range.end) +
                                    ") on link '" + link_id_ + "' overlaps committed key below " +
                                    std::to_string(cursor_));
  }
  if (range.end > total_) {
    throw Error(Errc::InsufficientKey, "mirror range beyond key held on link '" + link_id_ + "'");
  }
  if (range.begin > cursor_) {
    LedgerTag gap = tag;
    gap.channel.reset();
    gap.msg_id = 0;
    commit({cursor_, range.begin}, KeyPurpose::Discard, gap);
  }
  return commit(range, purpose, tag);
}

Reservation KeyStore::commit(KeyRange range, KeyPurpose purpose, const LedgerTag& tag) {
  auto first = material_.begin() + static_cast<std::ptrdiff_t>(range.begin - base_);
  Bytes key(first, first + static_cast<std::ptrdiff_t>(range.size()));
  ledger_.append({range, purpose, tag});
  cursor_ = range.end;
  trim();
  return Reservation(link_id_, range, purpose, std::move(key));
}

void KeyStore::trim() {
  constexpr std::uint64_t kSlack = 1 << 20;
  if (cursor_ - base_ > kSlack) {
    material_.erase(material_.begin(), material_.begin() + static_cast<std::ptrdiff_t>(cursor_ - base_));
    base_ = cursor_;
  }
}

}  // namespace qkdnet
