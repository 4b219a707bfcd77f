#ifndef TPKA_WIRE_HPP
#define TPKA_WIRE_HPP

// Over-the-air messages. Every frame is
//   tag[1] || version[1] || body_length[2, big-endian] || body
// and bodies use the layouts frozen in crypto.hpp.

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "tpka/accounting.hpp"
#include "tpka/crypto.hpp"
#include "tpka/key.hpp"

namespace tpka {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 4;

enum class MessageTag : std::uint8_t {
  hello = 1,
  hello_ack = 2,
  tp_advert = 3,
  key_request = 4,
  key_response = 5,
  key_confirm = 6,
  provision = 7,
};

inline const char* tag_name(MessageTag tag) {
  switch (tag) {
    case MessageTag::hello: return "Hello";
    case MessageTag::hello_ack: return "HelloAck";
    case MessageTag::tp_advert: return "TpAdvert";
    case MessageTag::key_request: return "KeyRequest";
    case MessageTag::key_response: return "KeyResponse";
    case MessageTag::key_confirm: return "KeyConfirm";
    case MessageTag::provision: return "Provision";
  }
  return "?";
}

struct Hello {
  NodeId sender;
  std::uint64_t nonce = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct HelloAck {
  NodeId sender;
  std::uint64_t echo = 0;
  friend bool operator==(const HelloAck&, const HelloAck&) = default;
};

struct TpAdvert {
  NodeId tp;
  Key128 link;
  friend bool operator==(const TpAdvert&, const TpAdvert&) = default;
};

/// Sealed under A_i of `requester`; key_hint names the third party.
struct KeyRequest {
  NodeId requester;
  SealedPacket sealed;
  friend bool operator==(const KeyRequest&, const KeyRequest&) = default;
};

/// Sealed under A_i of the requester; key_hint names the requester.
struct KeyResponse {
  NodeId tp;
  SealedPacket sealed;
  friend bool operator==(const KeyResponse&, const KeyResponse&) = default;
};

/// Sealed under the session key; key_hint names the responder.
struct KeyConfirm {
  NodeId initiator;
  SealedPacket sealed;
  friend bool operator==(const KeyConfirm&, const KeyConfirm&) = default;
};

/// Base station to third party, sealed under the third party's bs_key.
struct Provision {
  NodeId tp;
  SealedPacket sealed;
  friend bool operator==(const Provision&, const Provision&) = default;
};

using Message = std::variant<Hello, HelloAck, TpAdvert, KeyRequest, KeyResponse, KeyConfirm, Provision>;

inline MessageTag message_tag(const Message& m) { return static_cast<MessageTag>(m.index() + 1); }

// ---------------------------------------------------------------------------
// Sealed payloads

struct RequestPayload {
  NodeId requester;
  std::vector<NodeId> peers;

  Bytes encode() const {
    Bytes out;
    out.reserve(NodeId::wire_size * (1 + peers.size()));
    put_id(out, requester);
    for (auto p : peers) put_id(out, p);
    return out;
  }
  static RequestPayload decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < NodeId::wire_size || bytes.size() % NodeId::wire_size != 0) {
      throw Error(Errc::malformed_packet, "request payload is not a whole number of ids");
    }
    Reader in(bytes);
    RequestPayload p{in.id(), {}};
    while (in.remaining() > 0) p.peers.push_back(in.id());
    return p;
  }
  friend bool operator==(const RequestPayload&, const RequestPayload&) = default;
};

/// (i, j, Secret(i, j)) and (i, j, K_ij) share one layout.
struct PairKeyPayload {
  NodeId initiator;
  NodeId peer;
  Key128 key;

  static constexpr std::size_t size = 2 * NodeId::wire_size + Key128::size;

  Bytes encode() const {
    Bytes out;
    out.reserve(size);
    put_id(out, initiator);
    put_id(out, peer);
    put_key(out, key);
    return out;
  }
  static PairKeyPayload decode(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    PairKeyPayload p{in.id(), in.id(), in.key()};
    in.expect_end();
    return p;
  }
  friend bool operator==(const PairKeyPayload&, const PairKeyPayload&) = default;
};

struct ProvisionPayload {
  Key128 master_s;
  Key128 master_a;
  Key128 chain_seed;
  std::uint64_t cursor = 0;
  std::uint64_t wipe_deadline = 0;

  Bytes encode() const {
    Bytes out;
    put_key(out, master_s);
    put_key(out, master_a);
    put_key(out, chain_seed);
    put_u64(out, cursor);
    put_u64(out, wipe_deadline);
    return out;
  }
  static ProvisionPayload decode(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    ProvisionPayload p{in.key(), in.key(), in.key(), in.u64(), in.u64()};
    in.expect_end();
    return p;
  }
};

// ---------------------------------------------------------------------------
// Frame codec

namespace detail {

inline void put_sealed_body(Bytes& body, NodeId outer, const SealedPacket& s) {
  put_id(body, outer);
  s.append_to(body);
}

}  // namespace detail

inline Bytes encode(const Message& msg) {
  Bytes body;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello>) {
          put_id(body, m.sender);
          put_u64(body, m.nonce);
        } else if constexpr (std::is_same_v<T, HelloAck>) {
          put_id(body, m.sender);
          put_u64(body, m.echo);
        } else if constexpr (std::is_same_v<T, TpAdvert>) {
          put_id(body, m.tp);
          put_key(body, m.link);
        } else if constexpr (std::is_same_v<T, KeyRequest>) {
          detail::put_sealed_body(body, m.requester, m.sealed);
        } else if constexpr (std::is_same_v<T, KeyResponse>) {
          detail::put_sealed_body(body, m.tp, m.sealed);
        } else if constexpr (std::is_same_v<T, KeyConfirm>) {
          detail::put_sealed_body(body, m.initiator, m.sealed);
        } else {
          detail::put_sealed_body(body, m.tp, m.sealed);
        }
      },
      msg);
  if (body.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::malformed_packet, "frame body exceeds 65535 bytes");
  }
  Bytes out;
  out.reserve(kFrameHeaderSize + body.size());
  out.push_back(static_cast<std::uint8_t>(message_tag(msg)));
  out.push_back(kWireVersion);
  put_u16(out, static_cast<std::uint16_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline Message decode(std::span<const std::uint8_t> frame) {
  Reader in(frame);
  const std::uint8_t tag = in.u8();
  const std::uint8_t version = in.u8();
  const std::size_t length = in.u16();
  if (tag < 1 || tag > 7) throw Error(Errc::unknown_tag, "unknown message tag " + std::to_string(tag));
  if (version != kWireVersion) throw Error(Errc::malformed_packet, "unsupported wire version");
  if (in.remaining() != length) throw Error(Errc::malformed_packet, "frame length mismatch");

  auto sealed_body = [&](auto make) {
    if (length < NodeId::wire_size) throw Error(Errc::malformed_packet, "sealed frame too short");
    NodeId outer = in.id();
    return make(outer, SealedPacket::read(in, length - NodeId::wire_size));
  };

  Message out;
  switch (static_cast<MessageTag>(tag)) {
    case MessageTag::hello: out = Hello{in.id(), in.u64()}; break;
    case MessageTag::hello_ack: out = HelloAck{in.id(), in.u64()}; break;
    case MessageTag::tp_advert: out = TpAdvert{in.id(), in.key()}; break;
    case MessageTag::key_request:
      out = sealed_body([](NodeId o, SealedPacket s) { return KeyRequest{o, std::move(s)}; });
      break;
    case MessageTag::key_response:
      out = sealed_body([](NodeId o, SealedPacket s) { return KeyResponse{o, std::move(s)}; });
      break;
    case MessageTag::key_confirm:
      out = sealed_body([](NodeId o, SealedPacket s) { return KeyConfirm{o, std::move(s)}; });
      break;
    case MessageTag::provision:
      out = sealed_body([](NodeId o, SealedPacket s) { return Provision{o, std::move(s)}; });
      break;
  }
  in.expect_end();
  return out;
}

// ---------------------------------------------------------------------------
// Layout tallies for energy accounting

/// Units in a sealed payload of the given kind and ciphertext length.
inline ByteTally payload_tally(MessageTag tag, std::size_t ciphertext_bytes) {
  switch (tag) {
    case MessageTag::key_request: return {0, ciphertext_bytes / NodeId::wire_size, 0, 0, 0};
    case MessageTag::key_response:
    case MessageTag::key_confirm: return {0, 2, 1, 0, 0};
    case MessageTag::provision: return {0, 2, 3, 0, 0};
    default: return {};
  }
}

inline ByteTally request_payload_tally(std::size_t peers) { return {0, 1 + peers, 0, 0, 0}; }
inline constexpr ByteTally kPairKeyPayloadTally{0, 2, 1, 0, 0};

/// Units of the whole frame on the air.
inline ByteTally wire_tally(const Message& msg) {
  return std::visit(
      [&](const auto& m) -> ByteTally {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello> || std::is_same_v<T, HelloAck>) {
          return {1, 2, 0, 0, 0};
        } else if constexpr (std::is_same_v<T, TpAdvert>) {
          return {1, 1, 1, 0, 0};
        } else {
          ByteTally t{1, 2, 0, 1, 1};  // outer id + key_hint
          t += payload_tally(message_tag(msg), m.sealed.ciphertext.size());
          return t;
        }
      },
      msg);
}

}  // namespace tpka

#endif  // TPKA_WIRE_HPP
