#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkdnet/bytes.hpp"
#include "qkdnet/topology.hpp"

namespace qkdnet {

enum class Channel : std::uint8_t { Distill = 0, Routing = 1, Transport = 2, Control = 3 };
inline constexpr int kChannelCount = 4;
const char* to_string(Channel ch) noexcept;

enum class KeyPurpose { Encrypt, Authenticate, Discard };
const char* to_string(KeyPurpose p) noexcept;

/// Half-open range [begin, end) of byte indices in a store's key stream.
struct KeyRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  friend bool operator==(const KeyRange&, const KeyRange&) = default;
};

struct KeyBlock {
  std::uint64_t id = 0;
  Bytes bytes;
  std::string origin_link;
};

struct LedgerTag {
  std::optional<Channel> channel;
  std::uint64_t msg_id = 0;
  double time_s = 0.0;
};

struct LedgerRecord {
  KeyRange range;
  KeyPurpose purpose = KeyPurpose::Encrypt;
  LedgerTag tag;
};

/// Append-only record of every key byte ever committed.
class ConsumptionLedger {
 public:
  void append(LedgerRecord record);

  const std::vector<LedgerRecord>& records() const { return records_; }
  std::uint64_t total_bytes() const { return total_; }
  std::uint64_t bytes_for(Channel ch) const;
  std::uint64_t bytes_for(KeyPurpose p) const;

  // Independent re-check: sorts every recorded range and confirms that no
  // byte index appears twice.
  bool exclusive() const;

 private:
  std::vector<LedgerRecord> records_;
  std::uint64_t total_ = 0;
};

/// A committed key range. Move-only; spending it twice is an error.
class Reservation {
 public:
  Reservation(Reservation&&) noexcept = default;
  Reservation& operator=(Reservation&&) noexcept = default;
  Reservation(const Reservation&) = delete;
  Reservation& operator=(const Reservation&) = delete;

  const std::string& link_id() const { return link_id_; }
  KeyRange range() const { return range_; }
  KeyPurpose purpose() const { return purpose_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return key_.size(); }

  // Hands out the key bytes exactly once; Errc::ReservationConsumed after.
  ByteView take();

 private:
  friend class KeyStore;
  Reservation(std::string link_id, KeyRange range, KeyPurpose purpose, Bytes key)
      : link_id_(std::move(link_id)), range_(range), purpose_(purpose), key_(std::move(key)) {}

  std::string link_id_;
  KeyRange range_;
  KeyPurpose purpose_;
  Bytes key_;
  bool consumed_ = false;
};

/// One directional pool of link key. Bytes are committed in stream order:
/// every index below the cursor is in the ledger, so
/// initial + pushed - ledgered == available holds by construction and the
/// ledger can be audited independently.
class KeyStore {
 public:
  KeyStore(std::string link_id, ByteView initial, std::uint64_t auth_reserve = kDefaultAuthReserveBytes);

  const std::string& link_id() const { return link_id_; }

  // Errc::OutOfOrderBlock unless block.id exceeds every stored id.
  std::uint64_t push_key(const KeyBlock& block);

  // Sender side. Encrypt must leave auth_reserve untouched; Authenticate may
  // spend into it. Errc::InsufficientKey otherwise.
  Reservation reserve(std::uint64_t n_bytes, KeyPurpose purpose, const LedgerTag& tag = {});

  // Receiver side: commit exactly the range the peer used. Any skipped gap
  // below it is discarded (the peer already spent it). Errc::KeyReuse if the
  // range starts below the cursor.
  Reservation reserve_mirror(KeyRange range, KeyPurpose purpose, const LedgerTag& tag = {});

  // Feasibility check without committing anything.
  bool can_reserve(std::uint64_t n_bytes, KeyPurpose purpose) const;

  std::uint64_t available() const { return total_ - cursor_; }
  std::uint64_t initial_bytes() const { return initial_; }
  std::uint64_t pushed_bytes() const { return total_ - initial_; }
  std::uint64_t auth_reserve() const { return auth_reserve_; }
  std::uint64_t last_block_id() const { return last_block_id_; }
  std::uint64_t cursor() const { return cursor_; }
  const ConsumptionLedger& ledger() const { return ledger_; }

 private:
  Reservation commit(KeyRange range, KeyPurpose purpose, const LedgerTag& tag);
  void trim();

  std::string link_id_;
  std::uint64_t auth_reserve_;
  std::uint64_t initial_ = 0;
  std::uint64_t total_ = 0;
  std::uint64_t cursor_ = 0;
  std::uint64_t base_ = 0;  // stream index of material_[0]
  std::uint64_t last_block_id_ = 0;
  Bytes material_;
  ConsumptionLedger ledger_;
};

}  // namespace qkdnet
