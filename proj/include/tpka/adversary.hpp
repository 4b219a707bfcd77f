#ifndef TPKA_ADVERSARY_HPP
#define TPKA_ADVERSARY_HPP

// Node-capture adversary. It records sealed key-agreement traffic from its
// first capture onwards and learns link keys only by actually opening
// recorded transcripts with key material it extracted.

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "tpka/protocol.hpp"

namespace tpka {

/// Unordered link between two sensors, stored as (lower, higher).
using LinkKey = std::pair<NodeId, NodeId>;

inline LinkKey make_link(NodeId a, NodeId b) { return a < b ? LinkKey{a, b} : LinkKey{b, a}; }

struct CapturedMaterial {
  Round round = 0;
  NodeId id;
  bool third_party = false;
  std::optional<Key128> s_key;  // sensor S_i
  std::optional<Key128> a_key;  // sensor A_i
  std::optional<Key128> master_s;
  std::optional<Key128> master_a;
  std::optional<Key128> chain_seed;
  std::optional<Key128> bs_key;
  std::vector<std::pair<NodeId, Key128>> link_keys;

  std::size_t secret_bits() const {
    std::size_t keys = link_keys.size();
    for (const auto* k : {&s_key, &a_key, &master_s, &master_a, &chain_seed, &bs_key}) keys += k->has_value() ? 1 : 0;
    return keys * Key128::size * 8;
  }
};

inline CapturedMaterial capture(const SensorNode& node, Round now) {
  CapturedMaterial m;
  m.round = now;
  m.id = node.id;
  m.s_key = node.s_key;
  m.a_key = node.a_key;
  for (const auto& [peer, k] : node.established) m.link_keys.emplace_back(peer, k);
  return m;
}

inline CapturedMaterial capture(const ThirdParty& tp, Round now) {
  CapturedMaterial m;
  m.round = now;
  m.id = tp.id;
  m.third_party = true;
  m.master_s = tp.master_s;
  m.master_a = tp.master_a;
  m.chain_seed = tp.chain_seed;
  m.bs_key = tp.bs_key;
  return m;
}

struct Transcript {
  Round round = 0;
  Message message;  // KeyResponse or KeyConfirm
};

class Adversary {
 public:
  void on_capture(CapturedMaterial material) {
    if (!recording_from_ || material.round < *recording_from_) recording_from_ = material.round;
    captures_.push_back(std::move(material));
  }

  bool recording(Round delivery_round) const { return recording_from_ && delivery_round >= *recording_from_; }
  std::optional<Round> recording_from() const { return recording_from_; }

  void record(Round delivery_round, const Message& msg) {
    if (!recording(delivery_round)) return;
    if (std::holds_alternative<KeyConfirm>(msg) || std::holds_alternative<KeyResponse>(msg)) {
      transcripts_.push_back({delivery_round, msg});
    }
  }

  const std::vector<CapturedMaterial>& captures() const noexcept { return captures_; }
  const std::vector<Transcript>& transcripts() const noexcept { return transcripts_; }

  /// Link keys recoverable with the material of the first `steps`
  /// captures: keys extracted from captured sensors plus every recorded
  /// KeyConfirm that opens under a session key the adversary can derive.
  std::map<LinkKey, Key128> recovered_link_keys(std::size_t steps) const {
    steps = std::min(steps, captures_.size());
    std::optional<Key128> master_s;
    std::optional<Key128> master_a;
    std::map<NodeId, Key128> s_of;
    std::map<NodeId, Key128> a_of;
    std::map<LinkKey, Key128> out;
    for (std::size_t k = 0; k < steps; ++k) {
      const auto& m = captures_[k];
      if (m.master_s) master_s = m.master_s;
      if (m.master_a) master_a = m.master_a;
      if (m.s_key) s_of[m.id] = *m.s_key;
      if (m.a_key) a_of[m.id] = *m.a_key;
      for (const auto& [peer, key] : m.link_keys) out[make_link(m.id, peer)] = key;
    }

    auto s_for = [&](NodeId id) -> std::optional<Key128> {
      if (auto it = s_of.find(id); it != s_of.end()) return it->second;
      if (master_s) return keyed_hash(*master_s, id);
      return std::nullopt;
    };
    auto a_for = [&](NodeId id) -> std::optional<Key128> {
      if (auto it = a_of.find(id); it != a_of.end()) return it->second;
      if (master_a) return keyed_hash(*master_a, id);
      return std::nullopt;
    };

    std::map<std::pair<NodeId, NodeId>, Key128> shares;  // (initiator, peer)
    for (const auto& t : transcripts_) {
      const auto* resp = std::get_if<KeyResponse>(&t.message);
      if (!resp) continue;
      const auto a = a_for(resp->sealed.key_hint);
      if (!a) continue;
      try {
        const auto body = PairKeyPayload::decode(open(*a, resp->sealed));
        shares[{body.initiator, body.peer}] = body.key;
      } catch (const Error&) {
      }
    }

    for (const auto& t : transcripts_) {
      const auto* confirm = std::get_if<KeyConfirm>(&t.message);
      if (!confirm) continue;
      const NodeId initiator = confirm->initiator;
      const NodeId responder = confirm->sealed.key_hint;
      std::vector<Key128> candidates;
      if (const auto s_j = s_for(responder)) candidates.push_back(session_key_responder(*s_j, initiator));
      if (auto it = shares.find({initiator, responder}); it != shares.end()) {
        if (const auto s_i = s_for(initiator)) {
          candidates.push_back(session_key_initiator(SecretShare{initiator, responder, it->second}, *s_i, responder));
        }
      }
      for (const auto& session : candidates) {
        try {
          const auto body = PairKeyPayload::decode(open(session, confirm->sealed));
          out[make_link(body.initiator, body.peer)] = body.key;
          break;
        } catch (const Error&) {
        }
      }
    }
    return out;
  }

 private:
  std::optional<Round> recording_from_;
  std::vector<CapturedMaterial> captures_;
  std::vector<Transcript> transcripts_;
};

}  // namespace tpka

#endif  // TPKA_ADVERSARY_HPP
