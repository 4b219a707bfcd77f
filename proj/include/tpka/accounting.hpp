#ifndef TPKA_ACCOUNTING_HPP
#define TPKA_ACCOUNTING_HPP

#include <cstdint>

namespace tpka {

/// Byte volume of an operation expressed in layout units, so energy can be
/// re-priced under any packet size table after the run.
struct ByteTally {
  std::uint64_t header = 0;  // frame headers
  std::uint64_t id = 0;      // 8-byte fields: node ids, handshake nonces, counters
  std::uint64_t key = 0;     // 16-byte keys
  std::uint64_t nonce = 0;   // AEAD nonces
  std::uint64_t tag = 0;     // AEAD tags

  ByteTally& operator+=(const ByteTally& o) noexcept {
    header += o.header;
    id += o.id;
    key += o.key;
    nonce += o.nonce;
    tag += o.tag;
    return *this;
  }
  friend ByteTally operator+(ByteTally a, const ByteTally& b) noexcept { return a += b; }
  friend bool operator==(const ByteTally&, const ByteTally&) = default;
};

struct OpCount {
  std::uint64_t ops = 0;
  ByteTally bytes;

  void add(const ByteTally& t, std::uint64_t n = 1) noexcept {
    ops += n;
    for (std::uint64_t i = 0; i < n; ++i) bytes += t;
  }
  OpCount& operator+=(const OpCount& o) noexcept {
    ops += o.ops;
    bytes += o.bytes;
    return *this;
  }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

struct OpCounters {
  OpCount encrypt;
  OpCount decrypt;
  OpCount hash;
  OpCount keygen;
  OpCount transmit;
  OpCount receive;

  OpCounters& operator+=(const OpCounters& o) noexcept {
    encrypt += o.encrypt;
    decrypt += o.decrypt;
    hash += o.hash;
    keygen += o.keygen;
    transmit += o.transmit;
    receive += o.receive;
    return *this;
  }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

namespace tally {
inline constexpr ByteTally keyed_hash_input{0, 1, 1, 0, 0};  // key || id
inline constexpr ByteTally chain_hash_input{0, 0, 1, 0, 0};  // one link
inline constexpr ByteTally key{0, 0, 1, 0, 0};
}  // namespace tally

/// Cost ledger of one node. `agreement` covers the key-agreement exchange,
/// `discovery` covers handshakes and third-party adverts, `relay` covers
/// frames forwarded on behalf of a neighbour.
struct NodeLedger {
  OpCounters agreement;
  OpCounters discovery;
  OpCounters relay;
  std::uint64_t requesters_served = 0;  // third parties only
};

}  // namespace tpka

#endif  // TPKA_ACCOUNTING_HPP
