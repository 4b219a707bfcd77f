#ifndef TPKA_KEY_HPP
#define TPKA_KEY_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tpka {

using Bytes = std::vector<std::uint8_t>;

enum class Errc {
  invalid_peer,
  invalid_length,
  authentication_failure,
  malformed_packet,
  unknown_tag,
  domain_error,
  exhausted_chain,
  tp_not_found,
  hop_limit,
  no_intermediate,
  refused,
  provisioning,
  invalid_config,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_peer: return "invalid-peer";
    case Errc::invalid_length: return "invalid-length";
    case Errc::authentication_failure: return "authentication-failure";
    case Errc::malformed_packet: return "malformed-packet";
    case Errc::unknown_tag: return "unknown-tag";
    case Errc::domain_error: return "domain-error";
    case Errc::exhausted_chain: return "exhausted-chain";
    case Errc::tp_not_found: return "tp-not-found";
    case Errc::hop_limit: return "hop-limit";
    case Errc::no_intermediate: return "no-intermediate";
    case Errc::refused: return "refused";
    case Errc::provisioning: return "provisioning";
    case Errc::invalid_config: return "invalid-config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Opaque 128-bit secret. Every key, chain link, share and session key in
/// the scheme is one of these.
class Key128 {
 public:
  static constexpr std::size_t size = 16;

  constexpr Key128() = default;
  constexpr explicit Key128(const std::array<std::uint8_t, size>& bytes) : bytes_(bytes) {}

  static Key128 from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != size) {
      throw Error(Errc::invalid_length, "Key128 needs 16 bytes, got " + std::to_string(bytes.size()));
    }
    Key128 k;
    for (std::size_t i = 0; i < size; ++i) k.bytes_[i] = bytes[i];
    return k;
  }

  static Key128 from_hex(std::string_view hex) {
    if (hex.size() != 2 * size) throw Error(Errc::invalid_length, "Key128 hex must be 32 chars");
    auto nibble = [](char c) -> std::uint8_t {
      if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
      if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
      if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
      throw Error(Errc::malformed_packet, "bad hex digit");
    };
    Key128 k;
    for (std::size_t i = 0; i < size; ++i) {
      k.bytes_[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return k;
  }

  const std::array<std::uint8_t, size>& bytes() const noexcept { return bytes_; }
  std::span<const std::uint8_t, size> span() const noexcept { return bytes_; }

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * size);
    for (auto b : bytes_) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xf]);
    }
    return out;
  }

  bool is_zero() const noexcept {
    for (auto b : bytes_) {
      if (b != 0) return false;
    }
    return true;
  }

  Key128& operator^=(const Key128& other) noexcept {
    for (std::size_t i = 0; i < size; ++i) bytes_[i] ^= other.bytes_[i];
    return *this;
  }

  friend Key128 operator^(Key128 a, const Key128& b) noexcept { return a ^= b; }
  friend auto operator<=>(const Key128&, const Key128&) = default;

 private:
  std::array<std::uint8_t, size> bytes_{};
};

/// Node identifier; serialized as 8 bytes big-endian.
struct NodeId {
  std::uint64_t value = 0;

  static constexpr std::size_t wire_size = 8;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;

  std::array<std::uint8_t, wire_size> to_bytes() const noexcept {
    std::array<std::uint8_t, wire_size> out{};
    for (std::size_t i = 0; i < wire_size; ++i) {
      out[i] = static_cast<std::uint8_t>(value >> (8 * (wire_size - 1 - i)));
    }
    return out;
  }
};

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_key(Bytes& out, const Key128& k) { out.insert(out.end(), k.bytes().begin(), k.bytes().end()); }

inline void put_id(Bytes& out, NodeId id) { put_u64(out, id.value); }

/// Bounds-checked cursor over a received frame. Running off the end is a
/// malformed-packet error.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(Errc::malformed_packet, "truncated frame");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8() { return take(1)[0]; }

  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(s[0] << 8 | s[1]);
  }

  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (auto b : s) v = v << 8 | b;
    return v;
  }

  NodeId id() { return NodeId{u64()}; }
  Key128 key() { return Key128::from_bytes(take(Key128::size)); }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void expect_end() const {
    if (remaining() != 0) throw Error(Errc::malformed_packet, "trailing bytes in frame");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace tpka

template <>
struct std::hash<tpka::NodeId> {
  std::size_t operator()(const tpka::NodeId& id) const noexcept { return std::hash<std::uint64_t>{}(id.value); }
};

#endif  // TPKA_KEY_HPP
