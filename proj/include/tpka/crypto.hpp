#ifndef TPKA_CRYPTO_HPP
#define TPKA_CRYPTO_HPP

// Primitives and key-derivation algebra of the third-party key agreement.
//
// Frozen byte layouts (cross-implementation test vectors depend on them):
//   Key128          16 raw bytes
//   NodeId          8 bytes, big-endian
//   keyed hash      hash128(key[16] || id[8])
//   hash128(x)      first 16 bytes of SHA-256(x)
//   chain           L_0 = hash128(M), L_k = hash128(L_{k-1})
//   SealedPacket    key_hint[8] || nonce[12] || ciphertext || tag[16]
//                   AES-128-GCM, AAD = key_hint, nonce = first 12 bytes of
//                   SHA-256("tpka.seal.v1" || key || key_hint || plaintext)

#include <openssl/evp.h>

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tpka/key.hpp"

namespace tpka {

namespace detail {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};

inline const EVP_MD* sha256() {
  static EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
  return md;
}

inline const EVP_CIPHER* aes128_gcm() {
  static EVP_CIPHER* cipher = EVP_CIPHER_fetch(nullptr, "AES-128-GCM", nullptr);
  return cipher;
}

inline EVP_MD_CTX* md_ctx() {
  thread_local std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  return ctx.get();
}

inline EVP_CIPHER_CTX* cipher_ctx() {
  thread_local std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  return ctx.get();
}

inline void crypto_check(int ok, const char* what) {
  if (ok != 1) throw std::runtime_error(std::string("openssl failure: ") + what);
}

/// Full SHA-256 over the concatenation of parts.
inline std::array<std::uint8_t, 32> sha256_parts(std::initializer_list<std::span<const std::uint8_t>> parts) {
  EVP_MD_CTX* ctx = md_ctx();
  crypto_check(EVP_DigestInit_ex2(ctx, sha256(), nullptr), "digest init");
  for (auto p : parts) {
    if (!p.empty()) crypto_check(EVP_DigestUpdate(ctx, p.data(), p.size()), "digest update");
  }
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  crypto_check(EVP_DigestFinal_ex(ctx, out.data(), &len), "digest final");
  return out;
}

inline Key128 truncate128(const std::array<std::uint8_t, 32>& digest) {
  std::array<std::uint8_t, Key128::size> k{};
  std::copy_n(digest.begin(), Key128::size, k.begin());
  return Key128(k);
}

}  // namespace detail

inline Key128 hash128(std::span<const std::uint8_t> data) {
  return detail::truncate128(detail::sha256_parts({data}));
}

inline Key128 hash128(std::string_view text) {
  return hash128(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Key128 hash128(const Key128& key) { return hash128(key.span()); }

/// Hash(key, ID) with the frozen key || id layout.
inline Key128 keyed_hash(const Key128& key, NodeId id) {
  const auto id_bytes = id.to_bytes();
  return detail::truncate128(detail::sha256_parts({key.span(), id_bytes}));
}

struct NodeKeys {
  Key128 s;  ///< encryption key S_i
  Key128 a;  ///< authentication key A_i
  friend bool operator==(const NodeKeys&, const NodeKeys&) = default;
};

inline NodeKeys derive_node_keys(const Key128& master_s, const Key128& master_a, NodeId id) {
  return {keyed_hash(master_s, id), keyed_hash(master_a, id)};
}

struct SecretShare {
  NodeId initiator;
  NodeId peer;
  Key128 share;
};

/// Secret(i, j) = Hash(S_i, ID_j) xor Hash(S_j, ID_i).
inline SecretShare make_secret_share(const Key128& s_i, const Key128& s_j, NodeId id_i, NodeId id_j) {
  if (id_i == id_j) throw Error(Errc::invalid_peer, "secret share needs two distinct nodes");
  return {id_i, id_j, keyed_hash(s_i, id_j) ^ keyed_hash(s_j, id_i)};
}

/// Initiator side: Secret(i, j) xor Hash(S_i, ID_j).
inline Key128 session_key_initiator(const SecretShare& share, const Key128& s_i, NodeId id_j) {
  return share.share ^ keyed_hash(s_i, id_j);
}

/// Responder side: Hash(S_j, ID_i). Needs nothing from the third party.
inline Key128 session_key_responder(const Key128& s_j, NodeId id_i) { return keyed_hash(s_j, id_i); }

// ---------------------------------------------------------------------------
// Hash chain

/// L_k for the chain seeded by `seed`, i.e. hash128 applied k + 1 times.
inline Key128 chain_link(const Key128& seed, std::uint32_t k) {
  Key128 link = hash128(seed);
  for (std::uint32_t i = 0; i < k; ++i) link = hash128(link);
  return link;
}

class HashChain {
 public:
  HashChain(std::vector<Key128> links, std::uint32_t cursor) : links_(std::move(links)), cursor_(cursor) {}

  /// Index a of the last link; sensors are preloaded with links()[length()].
  std::uint32_t length() const noexcept { return static_cast<std::uint32_t>(links_.size() - 1); }
  std::uint32_t cursor() const noexcept { return cursor_; }
  const std::vector<Key128>& links() const noexcept { return links_; }
  const Key128& anchor() const noexcept { return links_.back(); }
  bool exhausted() const noexcept { return cursor_ == 0; }

  /// Discloses the link at the cursor and moves the cursor one step down.
  /// L_0 is never disclosed.
  Key128 disclose() {
    if (exhausted()) throw Error(Errc::exhausted_chain, "hash chain has no undisclosed links left");
    return links_[cursor_--];
  }

 private:
  std::vector<Key128> links_;
  std::uint32_t cursor_;
};

inline HashChain chain_generate(const Key128& seed, std::uint32_t length) {
  if (length == 0) throw Error(Errc::invalid_length, "hash chain length must be >= 1");
  std::vector<Key128> links;
  links.reserve(length + 1);
  links.push_back(hash128(seed));
  for (std::uint32_t k = 1; k <= length; ++k) links.push_back(hash128(links.back()));
  return HashChain(std::move(links), length - 1);
}

inline constexpr std::uint32_t kDefaultLookahead = 16;

struct ChainCheck {
  bool accepted = false;
  Key128 new_stored;
  std::uint32_t steps = 0;   ///< k with hash^k(disclosed) == stored, 0 when rejected
  std::uint32_t hashes = 0;  ///< hash evaluations spent
};

/// Accepts iff hash^k(disclosed) == stored for some 1 <= k <= lookahead. On
/// acceptance the disclosed link becomes the new anchor.
inline ChainCheck chain_verify_and_advance(const Key128& stored, const Key128& disclosed,
                                           std::uint32_t lookahead = kDefaultLookahead) {
  ChainCheck out{false, stored, 0, 0};
  Key128 probe = disclosed;
  for (std::uint32_t k = 1; k <= lookahead; ++k) {
    probe = hash128(probe);
    ++out.hashes;
    if (probe == stored) {
      out.accepted = true;
      out.new_stored = disclosed;
      out.steps = k;
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Authenticated encryption

struct SealedPacket {
  static constexpr std::size_t nonce_size = 12;
  static constexpr std::size_t tag_size = 16;
  static constexpr std::size_t overhead = NodeId::wire_size + nonce_size + tag_size;

  NodeId key_hint;
  std::array<std::uint8_t, nonce_size> nonce{};
  Bytes ciphertext;
  std::array<std::uint8_t, tag_size> tag{};

  std::size_t wire_size() const noexcept { return overhead + ciphertext.size(); }

  void append_to(Bytes& out) const {
    put_id(out, key_hint);
    out.insert(out.end(), nonce.begin(), nonce.end());
    out.insert(out.end(), ciphertext.begin(), ciphertext.end());
    out.insert(out.end(), tag.begin(), tag.end());
  }

  Bytes to_bytes() const {
    Bytes out;
    out.reserve(wire_size());
    append_to(out);
    return out;
  }

  /// Parses exactly `length` bytes of sealed packet from the reader.
  static SealedPacket read(Reader& in, std::size_t length) {
    if (length < overhead) throw Error(Errc::malformed_packet, "sealed packet shorter than its overhead");
    SealedPacket p;
    p.key_hint = in.id();
    auto n = in.take(nonce_size);
    std::copy(n.begin(), n.end(), p.nonce.begin());
    auto c = in.take(length - overhead);
    p.ciphertext.assign(c.begin(), c.end());
    auto t = in.take(tag_size);
    std::copy(t.begin(), t.end(), p.tag.begin());
    return p;
  }

  static SealedPacket from_bytes(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    auto p = read(in, bytes.size());
    in.expect_end();
    return p;
  }

  friend bool operator==(const SealedPacket&, const SealedPacket&) = default;
};

inline SealedPacket seal(const Key128& key, NodeId key_hint, std::span<const std::uint8_t> plaintext) {
  static constexpr std::string_view domain = "tpka.seal.v1";
  const auto hint = key_hint.to_bytes();
  const auto digest = detail::sha256_parts(
      {std::span(reinterpret_cast<const std::uint8_t*>(domain.data()), domain.size()), key.span(), hint, plaintext});

  SealedPacket p;
  p.key_hint = key_hint;
  std::copy_n(digest.begin(), SealedPacket::nonce_size, p.nonce.begin());
  p.ciphertext.resize(plaintext.size());

  EVP_CIPHER_CTX* ctx = detail::cipher_ctx();
  detail::crypto_check(EVP_EncryptInit_ex2(ctx, detail::aes128_gcm(), key.bytes().data(), p.nonce.data(), nullptr),
                       "encrypt init");
  int len = 0;
  detail::crypto_check(EVP_EncryptUpdate(ctx, nullptr, &len, hint.data(), static_cast<int>(hint.size())), "aad");
  if (!plaintext.empty()) {
    detail::crypto_check(EVP_EncryptUpdate(ctx, p.ciphertext.data(), &len, plaintext.data(),
                                           static_cast<int>(plaintext.size())),
                         "encrypt update");
  }
  detail::crypto_check(EVP_EncryptFinal_ex(ctx, p.ciphertext.data() + p.ciphertext.size(), &len), "encrypt final");
  detail::crypto_check(
      EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, static_cast<int>(SealedPacket::tag_size), p.tag.data()),
      "get tag");
  return p;
}

inline SealedPacket seal(const Key128& key, std::span<const std::uint8_t> plaintext) {
  return seal(key, NodeId{0}, plaintext);
}

/// Throws Error(authentication_failure) if the tag does not verify under
/// `key`; never returns unauthenticated plaintext.
inline Bytes open(const Key128& key, const SealedPacket& packet) {
  const auto hint = packet.key_hint.to_bytes();
  Bytes plain(packet.ciphertext.size());

  EVP_CIPHER_CTX* ctx = detail::cipher_ctx();
  detail::crypto_check(
      EVP_DecryptInit_ex2(ctx, detail::aes128_gcm(), key.bytes().data(), packet.nonce.data(), nullptr),
      "decrypt init");
  int len = 0;
  detail::crypto_check(EVP_DecryptUpdate(ctx, nullptr, &len, hint.data(), static_cast<int>(hint.size())), "aad");
  if (!packet.ciphertext.empty()) {
    detail::crypto_check(EVP_DecryptUpdate(ctx, plain.data(), &len, packet.ciphertext.data(),
                                           static_cast<int>(packet.ciphertext.size())),
                         "decrypt update");
  }
  auto tag = packet.tag;
  detail::crypto_check(
      EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, static_cast<int>(SealedPacket::tag_size), tag.data()),
      "set tag");
  if (EVP_DecryptFinal_ex(ctx, plain.data() + plain.size(), &len) != 1) {
    throw Error(Errc::authentication_failure, "sealed packet does not authenticate under this key");
  }
  return plain;
}

// ---------------------------------------------------------------------------
// Deterministic randomness

/// Seeded generator owned by one caller. Identical seeds give identical
/// key sequences on every platform (raw mt19937_64 output, no
/// implementation-defined distributions).
class KeyStream {
 public:
  explicit KeyStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Key128 random_key(KeyStream& rng) {
  std::array<std::uint8_t, Key128::size> bytes{};
  for (int half = 0; half < 2; ++half) {
    const std::uint64_t v = rng.next_u64();
    for (int i = 0; i < 8; ++i) bytes[half * 8 + i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  }
  return Key128(bytes);
}

}  // namespace tpka

#endif  // TPKA_CRYPTO_HPP
