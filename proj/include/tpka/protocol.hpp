#ifndef TPKA_PROTOCOL_HPP
#define TPKA_PROTOCOL_HPP

// Role state machines: sensor node, third party, base station.
//
// Flow of one link (i initiates towards neighbour j):
//   tp  -> *   TpAdvert{L_k}                      hash-chain authenticated
//   i   -> tp  KeyRequest  E_{A_i}(i, [j])
//   tp  -> i   KeyResponse E_{A_i}(i, j, Secret(i, j))
//   i   -> j   KeyConfirm  E_{Session}(i, j, K_ij)
// j derives Session = Hash(S_j, ID_i) on its own.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "tpka/accounting.hpp"
#include "tpka/crypto.hpp"
#include "tpka/wire.hpp"

namespace tpka {

using Round = std::uint64_t;

enum class Role { sensor, third_party, base_station };

struct SensorNode {
  NodeId id;
  Key128 s_key;
  Key128 a_key;
  Key128 anchor;  // most recent accepted chain link
  Round anchor_round = 0;

  std::set<NodeId> neighbors;  // handshake-confirmed only
  std::optional<NodeId> chosen_tp;
  std::set<NodeId> initiate_for;
  std::map<NodeId, Key128> pending_sessions;
  std::map<NodeId, Key128> established;

  std::uint64_t rejected_adverts = 0;
  std::uint64_t duplicate_adverts = 0;
  std::uint64_t failed_responses = 0;
  std::uint64_t failed_confirms = 0;
  NodeLedger ledger;

  std::array<const Key128*, 3> persistent_keys() const noexcept { return {&s_key, &a_key, &anchor}; }
  std::size_t persistent_key_bits() const noexcept { return persistent_keys().size() * Key128::size * 8; }
};

enum class TpMode {
  active,
  sleeping,  // powered down, secrets retained
  wiped,     // powered down, S, A and chain seed destroyed
};

inline const char* tp_mode_name(TpMode m) {
  switch (m) {
    case TpMode::active: return "active";
    case TpMode::sleeping: return "sleeping";
    case TpMode::wiped: return "wiped";
  }
  return "?";
}

struct ThirdParty {
  NodeId id;
  std::optional<Key128> master_s;
  std::optional<Key128> master_a;
  std::optional<Key128> chain_seed;  // M; links are recomputed on demand
  Key128 bs_key;
  std::uint32_t cursor = 0;
  Round wipe_deadline = 0;
  TpMode mode = TpMode::active;

  // Per-requester (S_i, A_i) derived during the current window. Transient.
  std::map<NodeId, NodeKeys> requester_cache;

  std::uint64_t dropped_requests = 0;
  std::uint64_t ignored_provisions = 0;
  NodeLedger ledger;

  std::size_t persistent_key_bits() const noexcept {
    std::size_t keys = 1;  // bs_key always survives
    for (const auto* k : {&master_s, &master_a, &chain_seed}) keys += k->has_value() ? 1 : 0;
    return keys * Key128::size * 8;
  }
};

/// Trusted base station holding the masters S, A, M and one exclusive key
/// per third party.
class BaseStation {
 public:
  BaseStation(KeyStream& rng, std::uint32_t chain_length)
      : master_s_(random_key(rng)),
        master_a_(random_key(rng)),
        chain_seed_(random_key(rng)),
        bs_master_(random_key(rng)),
        chain_length_(chain_length),
        chain_anchor_(chain_generate(chain_seed_, chain_length).anchor()) {}

  BaseStation(const Key128& s, const Key128& a, const Key128& m, const Key128& b, std::uint32_t chain_length)
      : master_s_(s),
        master_a_(a),
        chain_seed_(m),
        bs_master_(b),
        chain_length_(chain_length),
        chain_anchor_(chain_generate(chain_seed_, chain_length).anchor()) {}

  const Key128& master_s() const noexcept { return master_s_; }
  const Key128& master_a() const noexcept { return master_a_; }
  const Key128& chain_seed() const noexcept { return chain_seed_; }
  const Key128& chain_anchor() const noexcept { return chain_anchor_; }
  std::uint32_t chain_length() const noexcept { return chain_length_; }
  const std::map<NodeId, Role>& registry() const noexcept { return registry_; }

  Key128 bs_key_for(NodeId tp) const { return keyed_hash(bs_master_, tp); }

  SensorNode provision_sensor(NodeId id) {
    register_role(id, Role::sensor);
    SensorNode node;
    node.id = id;
    const auto keys = derive_node_keys(master_s_, master_a_, id);
    node.s_key = keys.s;
    node.a_key = keys.a;
    node.anchor = chain_anchor_;
    node.anchor_round = 0;
    return node;
  }

  ThirdParty provision_third_party(NodeId id, Round wipe_deadline) {
    register_role(id, Role::third_party);
    ThirdParty tp;
    tp.id = id;
    tp.master_s = master_s_;
    tp.master_a = master_a_;
    tp.chain_seed = chain_seed_;
    tp.bs_key = bs_key_for(id);
    tp.cursor = chain_length_ - 1;
    tp.wipe_deadline = wipe_deadline;
    tp.mode = TpMode::active;
    return tp;
  }

  /// Packet that restores a wiped third party's secrets.
  Provision make_provision(NodeId tp, std::uint32_t cursor, Round wipe_deadline) const {
    const ProvisionPayload payload{master_s_, master_a_, chain_seed_, cursor, wipe_deadline};
    return Provision{tp, seal(bs_key_for(tp), tp, payload.encode())};
  }

 private:
  void register_role(NodeId id, Role role) {
    auto [it, inserted] = registry_.emplace(id, role);
    if (!inserted && it->second != role) {
      throw Error(Errc::provisioning, "node " + std::to_string(id.value) + " already provisioned with another role");
    }
  }

  Key128 master_s_;
  Key128 master_a_;
  Key128 chain_seed_;
  Key128 bs_master_;
  std::uint32_t chain_length_;
  Key128 chain_anchor_;
  std::map<NodeId, Role> registry_;
};

// ---------------------------------------------------------------------------
// Neighbour discovery

/// Nonce-echo handshake. Both nodes beacon a Hello and answer the other's
/// Hello with a HelloAck echoing its nonce; a node accepts the peer only
/// when its own nonce comes back, which needs delivery in both directions.
inline bool handshake(SensorNode& a, SensorNode& b, bool a_reaches_b, bool b_reaches_a, KeyStream& rng) {
  if (a.id == b.id) return false;

  const Hello hello_a{a.id, rng.next_u64()};
  const Hello hello_b{b.id, rng.next_u64()};
  const auto hello_tally = wire_tally(Message{hello_a});
  a.ledger.discovery.transmit.add(hello_tally);
  b.ledger.discovery.transmit.add(hello_tally);

  std::optional<HelloAck> ack_from_b;
  std::optional<HelloAck> ack_from_a;
  if (a_reaches_b) {
    b.ledger.discovery.receive.add(hello_tally);
    ack_from_b = HelloAck{b.id, hello_a.nonce};
    b.ledger.discovery.transmit.add(hello_tally);
  }
  if (b_reaches_a) {
    a.ledger.discovery.receive.add(hello_tally);
    ack_from_a = HelloAck{a.id, hello_b.nonce};
    a.ledger.discovery.transmit.add(hello_tally);
  }

  bool a_confirms = false;
  bool b_confirms = false;
  if (ack_from_b && b_reaches_a) {
    a.ledger.discovery.receive.add(hello_tally);
    a_confirms = ack_from_b->echo == hello_a.nonce;
  }
  if (ack_from_a && a_reaches_b) {
    b.ledger.discovery.receive.add(hello_tally);
    b_confirms = ack_from_a->echo == hello_b.nonce;
  }
  if (a_confirms && b_confirms) {
    a.neighbors.insert(b.id);
    b.neighbors.insert(a.id);
    return true;
  }
  return false;
}

inline bool handshake(SensorNode& a, SensorNode& b, bool in_range, KeyStream& rng) {
  return handshake(a, b, in_range, in_range, rng);
}

// ---------------------------------------------------------------------------
// Third-party advertisement

/// Discloses the link at the cursor. Returns nothing when the third party
/// is not active.
inline std::optional<TpAdvert> tp_advertise(ThirdParty& tp) {
  if (tp.mode != TpMode::active || !tp.chain_seed) return std::nullopt;
  if (tp.cursor == 0) throw Error(Errc::exhausted_chain, "third party " + std::to_string(tp.id.value));
  TpAdvert advert{tp.id, chain_link(*tp.chain_seed, tp.cursor)};
  tp.ledger.discovery.hash.add(tally::chain_hash_input, tp.cursor + 1ULL);
  --tp.cursor;
  tp.ledger.discovery.transmit.add(wire_tally(Message{advert}));
  return advert;
}

enum class AdvertOutcome { accepted, rejected, duplicate, ignored };

inline const char* advert_outcome_name(AdvertOutcome o) {
  switch (o) {
    case AdvertOutcome::accepted: return "accepted";
    case AdvertOutcome::rejected: return "rejected";
    case AdvertOutcome::duplicate: return "duplicate";
    case AdvertOutcome::ignored: return "ignored";
  }
  return "?";
}

/// Verifies an advert received in round `now`. The link disclosed in round
/// r sits r - anchor_round hash steps below the anchor; anything else is
/// stale or forged. A node that already chose a third party in an earlier
/// round ignores further adverts.
inline AdvertOutcome sensor_accept_tp(SensorNode& node, const TpAdvert& advert, Round now,
                                      std::uint32_t lookahead = kDefaultLookahead) {
  node.ledger.discovery.receive.add(wire_tally(Message{advert}));
  if (node.chosen_tp && node.anchor_round < now) return AdvertOutcome::ignored;

  if (now <= node.anchor_round) {
    if (advert.link == node.anchor) {
      ++node.duplicate_adverts;
      return AdvertOutcome::duplicate;
    }
    ++node.rejected_adverts;
    return AdvertOutcome::rejected;
  }
  const Round steps = now - node.anchor_round;
  if (steps > lookahead) {
    ++node.rejected_adverts;
    return AdvertOutcome::rejected;
  }
  const auto check = chain_verify_and_advance(node.anchor, advert.link, static_cast<std::uint32_t>(steps));
  node.ledger.agreement.hash.add(tally::chain_hash_input, check.hashes);
  if (!check.accepted || check.steps != steps) {
    ++node.rejected_adverts;
    return AdvertOutcome::rejected;
  }
  node.anchor = check.new_stored;
  node.anchor_round = now;
  if (!node.chosen_tp) node.chosen_tp = advert.tp;
  return AdvertOutcome::accepted;
}

// ---------------------------------------------------------------------------
// Key agreement

/// Lower id initiates when both endpoints reach a third party; otherwise
/// the endpoint that does.
inline bool is_initiator(bool self_has_tp, NodeId self, bool peer_has_tp, NodeId peer) {
  if (!self_has_tp) return false;
  if (!peer_has_tp) return true;
  return self < peer;
}

enum class RequestBatching {
  per_neighbor,  // one KeyRequest per initiated link
  batched,       // one KeyRequest listing every initiated link
};

/// Sealed requests for every link in node.initiate_for.
inline std::vector<KeyRequest> request_keys(SensorNode& node, RequestBatching batching = RequestBatching::per_neighbor) {
  if (!node.chosen_tp) throw Error(Errc::tp_not_found, "node " + std::to_string(node.id.value) + " has no third party");
  std::vector<KeyRequest> out;
  if (node.initiate_for.empty()) return out;

  std::vector<std::vector<NodeId>> groups;
  if (batching == RequestBatching::batched) {
    groups.emplace_back(node.initiate_for.begin(), node.initiate_for.end());
  } else {
    for (auto peer : node.initiate_for) groups.push_back({peer});
  }
  for (auto& peers : groups) {
    for (auto p : peers) {
      if (!node.neighbors.contains(p)) throw Error(Errc::invalid_peer, "request names a non-neighbour");
    }
    const std::size_t count = peers.size();
    const RequestPayload payload{node.id, std::move(peers)};
    KeyRequest req{node.id, seal(node.a_key, *node.chosen_tp, payload.encode())};
    node.ledger.agreement.encrypt.add(request_payload_tally(count));
    node.ledger.agreement.transmit.add(wire_tally(Message{req}));
    out.push_back(std::move(req));
  }
  return out;
}

/// Opens an authenticated request and answers with one sealed share per
/// listed neighbour. Throws refused when the third party is not active and
/// authentication_failure (after logging the drop) on a forged request.
inline std::vector<KeyResponse> tp_serve_request(ThirdParty& tp, const KeyRequest& req) {
  tp.ledger.agreement.receive.add(wire_tally(Message{req}));
  if (tp.mode != TpMode::active || !tp.master_s || !tp.master_a) {
    throw Error(Errc::refused, "third party " + std::to_string(tp.id.value) + " is " + tp_mode_name(tp.mode));
  }
  if (req.sealed.key_hint != tp.id) {
    ++tp.dropped_requests;
    throw Error(Errc::refused, "request addressed to another third party");
  }

  auto cached = tp.requester_cache.find(req.requester);
  const bool first_contact = cached == tp.requester_cache.end();
  NodeKeys keys;
  if (first_contact) {
    keys = derive_node_keys(*tp.master_s, *tp.master_a, req.requester);
    tp.ledger.agreement.hash.add(tally::keyed_hash_input, 2);
  } else {
    keys = cached->second;
  }

  tp.ledger.agreement.decrypt.add(payload_tally(MessageTag::key_request, req.sealed.ciphertext.size()));
  RequestPayload payload;
  try {
    payload = RequestPayload::decode(open(keys.a, req.sealed));
  } catch (const Error&) {
    ++tp.dropped_requests;
    throw Error(Errc::authentication_failure, "request from " + std::to_string(req.requester.value) + " dropped");
  }
  if (payload.requester != req.requester) {
    ++tp.dropped_requests;
    throw Error(Errc::authentication_failure, "sealed requester id does not match the frame");
  }
  if (first_contact) {
    tp.requester_cache.emplace(req.requester, keys);
    ++tp.ledger.requesters_served;
  }

  std::vector<KeyResponse> out;
  out.reserve(payload.peers.size());
  for (auto peer : payload.peers) {
    if (peer == payload.requester) continue;
    const Key128 s_peer = keyed_hash(*tp.master_s, peer);
    const auto share = make_secret_share(keys.s, s_peer, payload.requester, peer);
    tp.ledger.agreement.hash.add(tally::keyed_hash_input, 3);

    const PairKeyPayload body{payload.requester, peer, share.share};
    KeyResponse resp{tp.id, seal(keys.a, payload.requester, body.encode())};
    tp.ledger.agreement.encrypt.add(kPairKeyPayloadTally);
    tp.ledger.agreement.transmit.add(wire_tally(Message{resp}));
    out.push_back(std::move(resp));
  }
  return out;
}

/// Initiator: opens a share, derives the session key, draws K_ij and seals
/// it for the neighbour. Records K_ij as established on this side.
inline KeyConfirm initiator_accept_response(SensorNode& node, const KeyResponse& resp, KeyStream& rng) {
  node.ledger.agreement.receive.add(wire_tally(Message{resp}));
  node.ledger.agreement.decrypt.add(kPairKeyPayloadTally);
  PairKeyPayload share;
  try {
    share = PairKeyPayload::decode(open(node.a_key, resp.sealed));
  } catch (const Error&) {
    ++node.failed_responses;
    throw Error(Errc::authentication_failure, "key response does not authenticate under A_i");
  }
  if (share.initiator != node.id || !node.neighbors.contains(share.peer)) {
    ++node.failed_responses;
    throw Error(Errc::invalid_peer, "key response names an unexpected link");
  }

  const Key128 session = session_key_initiator(SecretShare{share.initiator, share.peer, share.key}, node.s_key, share.peer);
  node.ledger.agreement.hash.add(tally::keyed_hash_input);
  node.pending_sessions[share.peer] = session;

  Key128 link_key = random_key(rng);
  while (link_key == session) link_key = random_key(rng);
  node.ledger.agreement.keygen.add(tally::key);

  const PairKeyPayload body{node.id, share.peer, link_key};
  KeyConfirm confirm{node.id, seal(session, share.peer, body.encode())};
  node.ledger.agreement.encrypt.add(kPairKeyPayloadTally);
  node.ledger.agreement.transmit.add(wire_tally(Message{confirm}));

  node.pending_sessions.erase(share.peer);
  node.established[share.peer] = link_key;
  return confirm;
}

/// Responder: derives Hash(S_j, ID_i) locally and opens the confirm.
inline void responder_accept_confirm(SensorNode& node, const KeyConfirm& confirm) {
  node.ledger.agreement.receive.add(wire_tally(Message{confirm}));
  const Key128 session = session_key_responder(node.s_key, confirm.initiator);
  node.ledger.agreement.hash.add(tally::keyed_hash_input);
  node.ledger.agreement.decrypt.add(kPairKeyPayloadTally);

  PairKeyPayload body;
  try {
    body = PairKeyPayload::decode(open(session, confirm.sealed));
  } catch (const Error&) {
    ++node.failed_confirms;
    throw Error(Errc::authentication_failure, "key confirm does not open under the derived session key");
  }
  if (body.initiator != confirm.initiator || body.peer != node.id) {
    ++node.failed_confirms;
    throw Error(Errc::authentication_failure, "key confirm names another link");
  }
  node.established[body.initiator] = body.key;
}

inline KeyConfirm complete_link(SensorNode& initiator, const KeyResponse& resp, SensorNode& responder, KeyStream& rng) {
  KeyConfirm confirm = initiator_accept_response(initiator, resp, rng);
  responder_accept_confirm(responder, confirm);
  return confirm;
}

// ---------------------------------------------------------------------------
// Two-hop relay

/// Forwards a frame unchanged. The relay parses the frame header only.
inline Bytes relay_forward(SensorNode& relay, std::span<const std::uint8_t> frame) {
  const auto tally = wire_tally(decode(frame));
  relay.ledger.relay.receive.add(tally);
  relay.ledger.relay.transmit.add(tally);
  return Bytes(frame.begin(), frame.end());
}

using FrameTamper = std::function<void(Bytes&)>;

/// Request/response round trip through exactly one intermediate neighbour.
/// Frames stay sealed under A_i end to end. `tamper`, when set, models a
/// relay that modifies the bytes it forwards.
inline std::vector<KeyResponse> relay_via_intermediate(SensorNode& node, std::span<SensorNode* const> relays,
                                                       ThirdParty& tp,
                                                       RequestBatching batching = RequestBatching::per_neighbor,
                                                       const FrameTamper& tamper = {}) {
  if (relays.empty()) throw Error(Errc::no_intermediate, "relay path has no intermediate");
  if (relays.size() > 1) throw Error(Errc::hop_limit, "at most one intermediate is allowed");
  SensorNode& via = *relays.front();
  if (!node.neighbors.contains(via.id) || !via.neighbors.contains(node.id)) {
    throw Error(Errc::no_intermediate, "intermediate is not a confirmed neighbour");
  }
  if (node.chosen_tp != tp.id) throw Error(Errc::tp_not_found, "node did not accept this third party");

  std::vector<KeyResponse> out;
  for (const auto& req : request_keys(node, batching)) {
    Bytes up = relay_forward(via, encode(Message{req}));
    if (tamper) tamper(up);
    const auto delivered = std::get<KeyRequest>(decode(up));
    for (auto& resp : tp_serve_request(tp, delivered)) {
      Bytes down = relay_forward(via, encode(Message{resp}));
      out.push_back(std::get<KeyResponse>(decode(down)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Third-party lifecycle

inline void tp_wipe(ThirdParty& tp) {
  tp.master_s.reset();
  tp.master_a.reset();
  tp.chain_seed.reset();
  tp.requester_cache.clear();
  tp.mode = TpMode::wiped;
}

/// Deletes the masters once `now` reaches the wipe deadline.
inline void tp_lifecycle(ThirdParty& tp, Round now) {
  if (tp.mode != TpMode::wiped && now >= tp.wipe_deadline) tp_wipe(tp);
}

/// Wake-up on redeployment. A Provision that fails under bs_key is
/// ignored; returns whether the third party is active afterwards.
inline bool tp_redeploy(ThirdParty& tp, const Provision& provision) {
  tp.ledger.discovery.receive.add(wire_tally(Message{provision}));
  if (provision.tp != tp.id || provision.sealed.key_hint != tp.id) {
    ++tp.ignored_provisions;
    return tp.mode == TpMode::active;
  }
  ProvisionPayload p;
  try {
    p = ProvisionPayload::decode(open(tp.bs_key, provision.sealed));
  } catch (const Error&) {
    ++tp.ignored_provisions;
    return tp.mode == TpMode::active;
  }
  tp.ledger.discovery.decrypt.add(payload_tally(MessageTag::provision, provision.sealed.ciphertext.size()));
  tp.master_s = p.master_s;
  tp.master_a = p.master_a;
  tp.chain_seed = p.chain_seed;
  tp.cursor = static_cast<std::uint32_t>(p.cursor);
  tp.wipe_deadline = p.wipe_deadline;
  tp.requester_cache.clear();
  tp.mode = TpMode::active;
  return true;
}

}  // namespace tpka

#endif  // TPKA_PROTOCOL_HPP
