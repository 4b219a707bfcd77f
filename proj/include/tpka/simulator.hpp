#ifndef TPKA_SIMULATOR_HPP
#define TPKA_SIMULATOR_HPP

// Round-based simulation of one key-establishment phase.
//
// Round 0        handshakes on every physical edge
// Round r >= 1   T_k lifecycle, scripted attack actions, message deliveries,
//                third-party adverts (then injected adverts)
// Round 2        initiator election and key requests
//
// A direct exchange completes in round 5 (request r3, response r4,
// confirm r5); one relayed through an intermediate completes in round 7.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "tpka/adversary.hpp"
#include "tpka/energy.hpp"
#include "tpka/geometry.hpp"
#include "tpka/protocol.hpp"
#include "tpka/topology.hpp"
#include "tpka/trace.hpp"

namespace tpka {

inline constexpr Round kRequestRound = 2;

// ---------------------------------------------------------------------------
// Attack scripts

enum class AttackKind { capture_sensor, capture_tp, inject_forged_advert, replay_advert, redeploy };

inline const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::capture_sensor: return "capture_sensor";
    case AttackKind::capture_tp: return "capture_tp";
    case AttackKind::inject_forged_advert: return "inject_forged_advert";
    case AttackKind::replay_advert: return "replay_advert";
    case AttackKind::redeploy: return "redeploy";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view text) {
  for (auto k : {AttackKind::capture_sensor, AttackKind::capture_tp, AttackKind::inject_forged_advert,
                 AttackKind::replay_advert, AttackKind::redeploy}) {
    if (text == attack_kind_name(k)) return k;
  }
  throw Error(Errc::invalid_config, "unknown attack action '" + std::string(text) + "'");
}

struct AttackAction {
  Round round = 1;
  AttackKind kind = AttackKind::capture_sensor;
  NodeId target;        // capture_*; redeploy (0 = every third party)
  Point near;           // inject_forged_advert, replay_advert
  Round link_round = 0; // replay_advert: round whose chain link is replayed
};

struct AttackScript {
  std::vector<AttackAction> actions;

  bool empty() const noexcept { return actions.empty(); }

  Round last_round() const noexcept { return actions.empty() ? 0 : actions.back().round; }

  void validate(const Topology& topo, std::uint32_t chain_length) const {
    Round prev = 0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto& a = actions[i];
      const std::string where = "attack action " + std::to_string(i) + ": ";
      if (a.round < 1) throw Error(Errc::invalid_config, where + "round must be >= 1");
      if (a.round < prev) throw Error(Errc::invalid_config, where + "rounds must be non-decreasing");
      prev = a.round;
      switch (a.kind) {
        case AttackKind::capture_sensor:
          if (!topo.is_sensor(a.target)) {
            throw Error(Errc::invalid_config, where + "unknown sensor id " + std::to_string(a.target.value));
          }
          break;
        case AttackKind::capture_tp:
          if (!topo.is_tp(a.target)) {
            throw Error(Errc::invalid_config, where + "unknown third-party id " + std::to_string(a.target.value));
          }
          break;
        case AttackKind::redeploy:
          if (a.target.value != 0 && !topo.is_tp(a.target)) {
            throw Error(Errc::invalid_config, where + "unknown third-party id " + std::to_string(a.target.value));
          }
          break;
        case AttackKind::replay_advert:
          if (a.link_round >= a.round) throw Error(Errc::invalid_config, where + "replayed link must predate the action");
          if (a.link_round >= chain_length) throw Error(Errc::invalid_config, where + "replayed link is outside the chain");
          [[fallthrough]];
        case AttackKind::inject_forged_advert:
          if (!(a.near.x >= 0 && a.near.x <= topo.side && a.near.y >= 0 && a.near.y <= topo.side)) {
            throw Error(Errc::invalid_config, where + "position outside the field");
          }
          break;
      }
    }
  }
};

/// `count` distinct sensors captured in `round`, chosen uniformly.
inline AttackScript random_sensor_captures(const Topology& topo, std::size_t count, Round round, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(topo.sensors.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  KeyStream rng(seed);
  count = std::min(count, idx.size());
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.next_u64() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  AttackScript script;
  for (std::size_t i = 0; i < count; ++i) {
    script.actions.push_back({round, AttackKind::capture_sensor, topo.sensor_id(idx[i]), {}, 0});
  }
  return script;
}

// ---------------------------------------------------------------------------
// Options and report

struct SimOptions {
  std::uint32_t chain_length = 32;
  std::uint32_t lookahead = kDefaultLookahead;
  Round tk_round = 9;      // third parties wipe at the start of this round
  Round advert_until = 0;  // last advert round; 0 advertises while active
  RequestBatching batching = RequestBatching::per_neighbor;
  double loss_rate = 0.0;  // independent per hop
  EnergyModel energy;
  bool per_node_energy = true;
  std::ostream* trace = nullptr;

  void validate() const {
    if (chain_length < 2) throw Error(Errc::invalid_config, "chain_length must be >= 2");
    if (lookahead < 1) throw Error(Errc::invalid_config, "lookahead must be >= 1");
    if (tk_round < 1) throw Error(Errc::invalid_config, "tk_round must be >= 1");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0)) throw Error(Errc::invalid_config, "loss_rate must be in [0, 1)");
    energy.validate();
  }
};

struct RoleSummary {
  std::uint64_t nodes = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
  OpCounters agreement;
  OpCounters discovery;
  OpCounters relay;
  EnergyBreakdown energy;  // all phases, summed over nodes
  double energy_mean_uj = 0;
  double energy_min_uj = 0;
  double energy_max_uj = 0;
  std::size_t memory_bits = 0;        // persistent keys after provisioning
  std::size_t memory_bits_final = 0;  // persistent keys at the end of the run
  double link_state_bits_mean = 0;    // established link keys, reported apart
  std::uint64_t requesters_served = 0;
};

struct CountComparison {
  std::string role;
  std::string op;
  double observed = 0;
  double expected = 0;
  double relative_gap = 0;
};

struct CapturePoint {
  std::uint64_t captured = 0;
  std::uint64_t captured_sensors = 0;
  std::uint64_t captured_tps = 0;
  double captured_fraction = 0;  // captured sensors / n
  std::uint64_t compromised_links = 0;
  double compromised_link_fraction = 0;
  std::uint64_t noncaptured_links = 0;
  std::uint64_t compromised_noncaptured_links = 0;
  double compromised_noncaptured_fraction = 0;
};

struct SimReport {
  static constexpr int schema = 1;

  std::uint64_t seed = 0;
  char scenario = 'A';
  std::string edge_mode;
  std::uint64_t sensors = 0;
  std::uint64_t third_parties = 0;
  double area = 0;
  double radius = 0;
  double density = 0;
  double mean_degree = 0;

  std::uint64_t edges = 0;
  std::uint64_t handshake_links = 0;
  std::uint64_t established_links = 0;
  std::uint64_t partial_links = 0;  // key recorded on one side only, or mismatched
  double empirical_local_connectivity = 0;

  std::uint64_t sensors_with_tp = 0;
  std::uint64_t requests_sent = 0;
  std::uint64_t relayed_frames = 0;
  std::uint64_t modeled_relay_frames = 0;
  std::uint64_t refused_requests = 0;
  std::uint64_t failed_exchanges = 0;

  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_dropped = 0;
  std::map<std::string, std::uint64_t> messages_by_tag;

  RoleSummary sensor;
  RoleSummary third_party;
  std::vector<CountComparison> operation_counts;
  std::vector<double> energy_uj_per_node;  // sensors then third parties

  std::uint64_t injected_adverts = 0;
  std::uint64_t impersonation_acceptances = 0;
  std::uint64_t rejected_adverts = 0;
  std::uint64_t duplicate_adverts = 0;
  std::vector<CapturePoint> capture_timeline;

  Round final_round = 0;
  EnergyModel energy_model;
};

/// Report plus end-of-run state, for inspection by callers and tests.
struct SimRun {
  SimReport report;
  std::vector<SensorNode> sensors;
  std::vector<ThirdParty> third_parties;
  Adversary adversary;
  std::map<LinkKey, Key128> established;     // links keyed identically on both sides
  std::map<LinkKey, Round> confirm_round;    // round the responder recorded K
  std::set<NodeId> captured_sensors;
};

// ---------------------------------------------------------------------------
// Engine

namespace detail {

struct Envelope {
  Round round = 0;   // delivery round of this hop
  NodeId from;       // transmitter of this hop
  NodeId to;         // receiver of this hop
  NodeId dest;       // final receiver
  NodeId via;        // intermediate of a relayed exchange, 0 when none
  bool modeled = false;
  Message msg;
};

class Engine {
 public:
  Engine(const Topology& topo, const geometry::DeploymentConfig& cfg, const AttackScript& attack,
         const SimOptions& opts)
      : topo_(topo), cfg_(cfg), attack_(attack), opts_(opts), trace_(opts.trace) {
    opts_.validate();
    attack_.validate(topo_, opts_.chain_length);
    KeyStream master(cfg.seed ^ 0x7470'6b61'7369'6d31ULL);
    KeyStream bs_rng(master.next_u64());
    key_rng_.emplace(master.next_u64());
    loss_rng_.emplace(master.next_u64());
    adversary_rng_.emplace(master.next_u64());
    bs_.emplace(bs_rng, opts_.chain_length);
    reach_ = geometry::reach_multiplier(cfg.scenario) * topo.radius;
  }

  SimRun run() {
    provision();
    handshakes();
    tp_lists();

    Round last = std::max(opts_.tk_round, attack_.last_round());
    Round r = 1;
    for (;; ++r) {
      const bool pending = !queue_.empty();
      if (r > last && !pending && !any_active_tp()) break;
      for (auto& tp : run_.third_parties) {
        const bool was = tp.mode != TpMode::wiped;
        tp_lifecycle(tp, r);
        if (was && tp.mode == TpMode::wiped) trace_.record(r, "wipe", tp.id, tp.id, "-", "wiped");
      }
      apply_actions(r, last);
      deliver_round(r);
      adverts(r);
      injections(r);
      if (r == kRequestRound) requests(r);
    }
    run_.report.final_round = r - 1;
    finish();
    return std::move(run_);
  }

 private:
  void provision() {
    run_.sensors.reserve(topo_.sensors.size());
    for (std::size_t i = 0; i < topo_.sensors.size(); ++i) run_.sensors.push_back(bs_->provision_sensor(topo_.sensor_id(i)));
    run_.third_parties.reserve(topo_.third_parties.size());
    for (std::size_t k = 0; k < topo_.third_parties.size(); ++k) {
      run_.third_parties.push_back(bs_->provision_third_party(topo_.tp_id(k), opts_.tk_round));
    }
    if (!run_.sensors.empty()) run_.report.sensor.memory_bits = run_.sensors.front().persistent_key_bits();
    if (!run_.third_parties.empty()) {
      run_.report.third_party.memory_bits = run_.third_parties.front().persistent_key_bits();
    }
  }

  bool hop_survives() { return opts_.loss_rate <= 0.0 || loss_rng_->uniform() >= opts_.loss_rate; }

  void count_tag(MessageTag tag, std::uint64_t sent, std::uint64_t delivered) {
    run_.report.messages_sent += sent;
    run_.report.messages_delivered += delivered;
    run_.report.messages_dropped += sent - delivered;
    run_.report.messages_by_tag[tag_name(tag)] += sent;
  }

  void handshakes() {
    for (std::size_t i = 0; i < topo_.adjacency.size(); ++i) {
      for (auto j : topo_.adjacency[i]) {
        if (j <= i) continue;
        const bool ab = hop_survives();
        const bool ba = hop_survives();
        const bool ok = handshake(run_.sensors[i], run_.sensors[j], ab, ba, *key_rng_);
        const std::uint64_t acks = (ab ? 1 : 0) + (ba ? 1 : 0);
        count_tag(MessageTag::hello, 2, acks);
        count_tag(MessageTag::hello_ack, acks, (ab && ba) ? acks : 0);
        trace_.record(0, "handshake", run_.sensors[i].id, run_.sensors[j].id, "Hello", ok ? "confirmed" : "failed");
      }
    }
  }

  void tp_lists() {
    CellGrid grid(topo_, topo_.third_parties, reach_);
    tps_near_.resize(topo_.sensors.size());
    for (std::size_t i = 0; i < topo_.sensors.size(); ++i) tps_near_[i] = grid.within(topo_.sensors[i]);
  }

  bool any_active_tp() const {
    return std::any_of(run_.third_parties.begin(), run_.third_parties.end(),
                       [](const ThirdParty& tp) { return tp.mode == TpMode::active; });
  }

  SensorNode& sensor(NodeId id) { return run_.sensors[topo_.sensor_index(id)]; }
  ThirdParty& tp(NodeId id) { return run_.third_parties[topo_.tp_index(id)]; }

  void send(Envelope env) {
    if (trace_.enabled()) trace_.record(env.round - 1, "send", env.from, env.to, tag_name(message_tag(env.msg)), "queued");
    queue_[env.round].push_back(std::move(env));
  }

  // --- attack actions -----------------------------------------------------

  void apply_actions(Round r, Round& last) {
    while (next_action_ < attack_.actions.size() && attack_.actions[next_action_].round == r) {
      const auto& a = attack_.actions[next_action_++];
      switch (a.kind) {
        case AttackKind::capture_sensor:
          run_.adversary.on_capture(capture(sensor(a.target), r));
          run_.captured_sensors.insert(a.target);
          trace_.record(r, "capture", a.target, a.target, "-", "sensor");
          break;
        case AttackKind::capture_tp: {
          const auto& victim = tp(a.target);
          run_.adversary.on_capture(capture(victim, r));
          trace_.record(r, "capture", a.target, a.target, "-", tp_mode_name(victim.mode));
          break;
        }
        case AttackKind::redeploy:
          for (auto& t : run_.third_parties) {
            if (a.target.value != 0 && t.id != a.target) continue;
            const std::uint32_t cursor = r < opts_.chain_length ? static_cast<std::uint32_t>(opts_.chain_length - r) : 0;
            const Round deadline = r + opts_.tk_round;
            const bool active = tp_redeploy(t, bs_->make_provision(t.id, cursor, deadline));
            count_tag(MessageTag::provision, 1, 1);
            trace_.record(r, "redeploy", NodeId{0}, t.id, "Provision", active ? "active" : "ignored");
            last = std::max(last, deadline);
          }
          break;
        case AttackKind::inject_forged_advert:
        case AttackKind::replay_advert:
          pending_injections_.push_back(a);
          break;
      }
    }
  }

  void injections(Round r) {
    if (pending_injections_.empty()) return;
    if (!sensor_grid_) sensor_grid_.emplace(topo_, topo_.sensors, topo_.radius);
    for (const auto& a : pending_injections_) {
      const NodeId fake{(1ULL << 63) + ++run_.report.injected_adverts};
      TpAdvert advert{fake, {}};
      if (a.kind == AttackKind::inject_forged_advert) {
        advert.link = random_key(*adversary_rng_);
      } else {
        advert.link = chain_link(bs_->chain_seed(), static_cast<std::uint32_t>(opts_.chain_length - a.link_round));
      }
      for (const auto& [dist, idx] : sensor_grid_->within(a.near)) {
        auto& node = run_.sensors[idx];
        const auto outcome = sensor_accept_tp(node, advert, r, opts_.lookahead);
        count_tag(MessageTag::tp_advert, 1, 1);
        if (outcome == AdvertOutcome::accepted) ++run_.report.impersonation_acceptances;
        trace_.record(r, attack_kind_name(a.kind), fake, node.id, "TpAdvert", advert_outcome_name(outcome));
      }
    }
    pending_injections_.clear();
  }

  // --- adverts ------------------------------------------------------------

  void adverts(Round r) {
    if (opts_.advert_until != 0 && r > opts_.advert_until) return;
    std::vector<std::optional<TpAdvert>> current(run_.third_parties.size());
    bool any = false;
    for (std::size_t k = 0; k < run_.third_parties.size(); ++k) {
      auto& t = run_.third_parties[k];
      if (t.mode != TpMode::active || t.cursor == 0) continue;
      current[k] = tp_advertise(t);
      any = true;
    }
    if (!any) return;
    for (std::size_t i = 0; i < run_.sensors.size(); ++i) {
      auto& node = run_.sensors[i];
      for (const auto& [dist, k] : tps_near_[i]) {
        if (!current[k]) continue;
        const bool delivered = hop_survives();
        count_tag(MessageTag::tp_advert, 1, delivered ? 1 : 0);
        if (!delivered) continue;
        const auto outcome = sensor_accept_tp(node, *current[k], r, opts_.lookahead);
        if (trace_.enabled()) trace_.record(r, "advert", current[k]->tp, node.id, "TpAdvert", advert_outcome_name(outcome));
      }
    }
  }

  // --- key requests -------------------------------------------------------

  void requests(Round r) {
    auto has_tp = [](const SensorNode& n) { return n.chosen_tp.has_value(); };
    for (auto& node : run_.sensors) {
      for (auto peer_id : node.neighbors) {
        if (peer_id < node.id) continue;
        auto& peer = sensor(peer_id);
        if (is_initiator(has_tp(node), node.id, has_tp(peer), peer.id)) {
          node.initiate_for.insert(peer.id);
        } else if (is_initiator(has_tp(peer), peer.id, has_tp(node), node.id)) {
          peer.initiate_for.insert(node.id);
        }
      }
    }
    for (std::size_t i = 0; i < run_.sensors.size(); ++i) {
      auto& node = run_.sensors[i];
      if (!node.chosen_tp) continue;
      ++run_.report.sensors_with_tp;
      if (node.initiate_for.empty()) continue;
      const NodeId tp_id = *node.chosen_tp;
      for (auto& req : request_keys(node, opts_.batching)) {
        ++run_.report.requests_sent;
        if (!topo_.is_tp(tp_id)) {
          count_tag(MessageTag::key_request, 1, 0);
          trace_.record(r, "send", node.id, tp_id, "KeyRequest", "no_receiver");
          continue;
        }
        const double dist = topo_.distance(topo_.sensors[i], topo_.third_parties[topo_.tp_index(tp_id)]);
        Envelope env{r + 1, node.id, tp_id, tp_id, NodeId{0}, false, Message{std::move(req)}};
        if (dist > topo_.radius) {
          if (auto via = intermediate(node, tp_id)) {
            env.to = *via;
            env.via = *via;
          } else {
            env.round = r + 2;
            env.modeled = true;
            ++run_.report.modeled_relay_frames;
          }
        }
        send(std::move(env));
      }
    }
  }

  /// Nearest confirmed neighbour within R of the third party.
  std::optional<NodeId> intermediate(const SensorNode& node, NodeId tp_id) const {
    const Point tp_at = topo_.third_parties[topo_.tp_index(tp_id)];
    std::optional<std::pair<double, NodeId>> best;
    for (auto nb : node.neighbors) {
      const double d = topo_.distance(topo_.sensors[topo_.sensor_index(nb)], tp_at);
      if (d <= topo_.radius && (!best || std::make_pair(d, nb) < *best)) best = std::make_pair(d, nb);
    }
    if (!best) return std::nullopt;
    return best->second;
  }

  // --- deliveries ---------------------------------------------------------

  void deliver_round(Round r) {
    auto it = queue_.find(r);
    if (it == queue_.end()) return;
    auto batch = std::move(it->second);
    queue_.erase(it);
    for (auto& env : batch) deliver(r, env);
  }

  void deliver(Round r, Envelope& env) {
    const MessageTag tag = message_tag(env.msg);
    if (env.to == env.dest) run_.adversary.record(r, env.msg);
    if (!hop_survives()) {
      count_tag(tag, 1, 0);
      if (trace_.enabled()) trace_.record(r, "deliver", env.from, env.to, tag_name(tag), "dropped");
      if (tag == MessageTag::key_request || tag == MessageTag::key_response || tag == MessageTag::key_confirm) {
        ++run_.report.failed_exchanges;
      }
      return;
    }
    count_tag(tag, 1, 1);

    if (env.to != env.dest) {
      auto& relay = sensor(env.to);
      Bytes frame = relay_forward(relay, encode(env.msg));
      ++run_.report.relayed_frames;
      trace_.record(r, "deliver", env.from, env.to, tag_name(tag), "relayed");
      send({r + 1, env.to, env.dest, env.dest, env.via, false, decode(frame)});
      return;
    }

    try {
      std::visit([&](const auto& m) { handle(r, env, m); }, env.msg);
    } catch (const Error& e) {
      if (e.code() == Errc::refused) ++run_.report.refused_requests;
      ++run_.report.failed_exchanges;
      trace_.record(r, "deliver", env.from, env.to, tag_name(tag), errc_name(e.code()));
    }
  }

  void handle(Round r, const Envelope& env, const KeyRequest& req) {
    auto responses = tp_serve_request(tp(env.to), req);
    trace_.record(r, "deliver", env.from, env.to, "KeyRequest", "served");
    for (auto& resp : responses) {
      Envelope out{r + 1, env.to, req.requester, req.requester, env.via, env.modeled, Message{std::move(resp)}};
      if (env.via.value != 0) {
        out.to = env.via;
      } else if (env.modeled) {
        out.round = r + 2;
        ++run_.report.modeled_relay_frames;
      }
      send(std::move(out));
    }
  }

  void handle(Round r, const Envelope& env, const KeyResponse& resp) {
    auto& node = sensor(env.to);
    KeyConfirm confirm = initiator_accept_response(node, resp, *key_rng_);
    trace_.record(r, "deliver", env.from, env.to, "KeyResponse", "accepted");
    const NodeId responder = confirm.sealed.key_hint;
    send({r + 1, node.id, responder, responder, NodeId{0}, false, Message{std::move(confirm)}});
  }

  void handle(Round r, const Envelope& env, const KeyConfirm& confirm) {
    responder_accept_confirm(sensor(env.to), confirm);
    run_.confirm_round[make_link(confirm.initiator, env.to)] = r;
    trace_.record(r, "deliver", env.from, env.to, "KeyConfirm", "established");
  }

  template <typename M>
  void handle(Round r, const Envelope& env, const M&) {
    trace_.record(r, "deliver", env.from, env.to, tag_name(message_tag(env.msg)), "ignored");
  }

  // --- results ------------------------------------------------------------

  void finish() {
    auto& rep = run_.report;
    rep.seed = cfg_.seed;
    rep.scenario = geometry::scenario_name(cfg_.scenario);
    rep.edge_mode = edge_mode_name(topo_.mode);
    rep.sensors = topo_.sensors.size();
    rep.third_parties = topo_.third_parties.size();
    rep.area = topo_.side * topo_.side;
    rep.radius = topo_.radius;
    rep.density = cfg_.effective_density();
    rep.mean_degree = topo_.mean_degree();
    rep.edges = topo_.edge_count();
    rep.energy_model = opts_.energy;

    for (const auto& node : run_.sensors) {
      for (const auto& [peer, key] : node.established) {
        if (peer < node.id) continue;
        const auto& other = sensor(peer).established;
        auto it = other.find(node.id);
        if (it != other.end() && it->second == key) {
          run_.established.emplace(make_link(node.id, peer), key);
        } else {
          ++rep.partial_links;
        }
      }
      for (const auto& [peer, key] : node.established) {
        if (peer > node.id) continue;
        if (!sensor(peer).established.contains(node.id)) ++rep.partial_links;
      }
      rep.handshake_links += static_cast<std::uint64_t>(std::count_if(
          node.neighbors.begin(), node.neighbors.end(), [&](NodeId p) { return p > node.id; }));
      rep.rejected_adverts += node.rejected_adverts;
      rep.duplicate_adverts += node.duplicate_adverts;
    }
    rep.established_links = run_.established.size();
    rep.empirical_local_connectivity =
        rep.edges == 0 ? 0.0 : static_cast<double>(rep.established_links) / static_cast<double>(rep.edges);

    summarise_sensors();
    summarise_tps();
    compare_counts();
    timeline();
  }

  template <typename Node>
  void accumulate(RoleSummary& s, const Node& node, double& energy_out) {
    s.agreement += node.ledger.agreement;
    s.discovery += node.ledger.discovery;
    s.relay += node.ledger.relay;
    s.messages_sent += node.ledger.agreement.transmit.ops + node.ledger.discovery.transmit.ops +
                       node.ledger.relay.transmit.ops;
    s.messages_received += node.ledger.agreement.receive.ops + node.ledger.discovery.receive.ops +
                           node.ledger.relay.receive.ops;
    const auto e = energy_accounting(node.ledger, opts_.energy);
    s.energy += e;
    energy_out = e.total();
  }

  void finalize_energy(RoleSummary& s, const std::vector<double>& per_node) {
    s.nodes = per_node.size();
    if (per_node.empty()) return;
    s.energy_mean_uj = s.energy.total() / static_cast<double>(per_node.size());
    s.energy_min_uj = *std::min_element(per_node.begin(), per_node.end());
    s.energy_max_uj = *std::max_element(per_node.begin(), per_node.end());
  }

  void summarise_sensors() {
    auto& s = run_.report.sensor;
    std::vector<double> per_node(run_.sensors.size());
    std::uint64_t link_keys = 0;
    for (std::size_t i = 0; i < run_.sensors.size(); ++i) {
      accumulate(s, run_.sensors[i], per_node[i]);
      link_keys += run_.sensors[i].established.size();
    }
    finalize_energy(s, per_node);
    if (!run_.sensors.empty()) {
      s.memory_bits_final = run_.sensors.front().persistent_key_bits();
      s.link_state_bits_mean =
          static_cast<double>(link_keys * Key128::size * 8) / static_cast<double>(run_.sensors.size());
    }
    if (opts_.per_node_energy) run_.report.energy_uj_per_node = per_node;
  }

  void summarise_tps() {
    auto& s = run_.report.third_party;
    std::vector<double> per_node(run_.third_parties.size());
    std::size_t final_bits = 0;
    for (std::size_t k = 0; k < run_.third_parties.size(); ++k) {
      const auto& t = run_.third_parties[k];
      accumulate(s, t, per_node[k]);
      s.requesters_served += t.ledger.requesters_served;
      final_bits = std::max(final_bits, t.persistent_key_bits());
    }
    finalize_energy(s, per_node);
    s.memory_bits_final = final_bits;
    if (opts_.per_node_energy) {
      run_.report.energy_uj_per_node.insert(run_.report.energy_uj_per_node.end(), per_node.begin(), per_node.end());
    }
  }

  /// Mean agreement-phase counts against the analytic overhead model with d
  /// equal to the mean handshake degree. Third-party counts are per
  /// requester served.
  void compare_counts() {
    auto& rep = run_.report;
    const double d = rep.sensors == 0 ? 0.0 : 2.0 * static_cast<double>(rep.handshake_links) / static_cast<double>(rep.sensors);
    auto add = [&](const char* role, const OpCounters& c, double denom, const ExpectedCounts& e) {
      if (denom <= 0) return;
      const std::pair<const char*, std::pair<double, double>> rows[] = {
          {"encrypt", {static_cast<double>(c.encrypt.ops) / denom, e.encrypt}},
          {"decrypt", {static_cast<double>(c.decrypt.ops) / denom, e.decrypt}},
          {"hash", {static_cast<double>(c.hash.ops) / denom, e.hash}},
          {"keygen", {static_cast<double>(c.keygen.ops) / denom, e.keygen}},
          {"transmit", {static_cast<double>(c.transmit.ops) / denom, e.transmit}},
          {"receive", {static_cast<double>(c.receive.ops) / denom, e.receive}},
      };
      for (const auto& [op, v] : rows) {
        const double gap = v.second == 0.0 ? (v.first == 0.0 ? 0.0 : 1.0) : std::abs(v.first - v.second) / v.second;
        rep.operation_counts.push_back({role, op, v.first, v.second, gap});
      }
    };
    add("sensor", rep.sensor.agreement, static_cast<double>(rep.sensors), expected_sensor_counts(d));
    add("third_party", rep.third_party.agreement, static_cast<double>(rep.third_party.requesters_served),
        expected_tp_counts(d));
  }

  void timeline() {
    auto& rep = run_.report;
    const auto& caps = run_.adversary.captures();
    std::set<NodeId> captured;
    std::uint64_t tps = 0;
    for (std::size_t k = 0; k <= caps.size(); ++k) {
      if (k > 0) {
        if (caps[k - 1].third_party) {
          ++tps;
        } else {
          captured.insert(caps[k - 1].id);
        }
      }
      CapturePoint p;
      p.captured = k;
      p.captured_sensors = captured.size();
      p.captured_tps = tps;
      p.captured_fraction = rep.sensors == 0 ? 0.0 : static_cast<double>(captured.size()) / static_cast<double>(rep.sensors);
      const auto recovered = k == 0 ? std::map<LinkKey, Key128>{} : run_.adversary.recovered_link_keys(k);
      for (const auto& [link, key] : run_.established) {
        const bool noncaptured = !captured.contains(link.first) && !captured.contains(link.second);
        auto it = recovered.find(link);
        const bool known = it != recovered.end() && it->second == key;
        if (known) ++p.compromised_links;
        if (noncaptured) {
          ++p.noncaptured_links;
          if (known) ++p.compromised_noncaptured_links;
        }
      }
      const double total = static_cast<double>(run_.established.size());
      p.compromised_link_fraction = total == 0 ? 0.0 : static_cast<double>(p.compromised_links) / total;
      p.compromised_noncaptured_fraction =
          p.noncaptured_links == 0 ? 0.0
                                   : static_cast<double>(p.compromised_noncaptured_links) / static_cast<double>(p.noncaptured_links);
      rep.capture_timeline.push_back(p);
    }
  }

  const Topology& topo_;
  geometry::DeploymentConfig cfg_;
  const AttackScript& attack_;
  SimOptions opts_;
  TraceWriter trace_;
  double reach_ = 0;

  std::optional<BaseStation> bs_;
  std::optional<KeyStream> key_rng_;
  std::optional<KeyStream> loss_rng_;
  std::optional<KeyStream> adversary_rng_;
  std::vector<std::vector<std::pair<double, std::uint32_t>>> tps_near_;
  std::optional<CellGrid> sensor_grid_;
  std::map<Round, std::vector<Envelope>> queue_;
  std::size_t next_action_ = 0;
  std::vector<AttackAction> pending_injections_;
  SimRun run_;
};

}  // namespace detail

/// Full run with end state exposed.
inline SimRun simulate(const Topology& topo, const geometry::DeploymentConfig& cfg, const AttackScript& attack = {},
                       const SimOptions& opts = {}) {
  return detail::Engine(topo, cfg, attack, opts).run();
}

inline SimReport run_key_establishment(const Topology& topo, const geometry::DeploymentConfig& cfg,
                                       const AttackScript& attack = {}, const SimOptions& opts = {}) {
  return simulate(topo, cfg, attack, opts).report;
}

/// Deploys under cfg.seed, runs the schedule and returns the capture
/// timeline (captured fraction -> compromised non-captured-link fraction).
inline std::vector<CapturePoint> resilience_experiment(const geometry::DeploymentConfig& cfg, EdgeMode mode,
                                                       const AttackScript& schedule, const SimOptions& opts = {}) {
  const auto topo = deploy(cfg, mode, cfg.seed);
  return run_key_establishment(topo, cfg, schedule, opts).capture_timeline;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialSpec {
  geometry::DeploymentConfig cfg;
  EdgeMode mode = EdgeMode::torus;
  AttackScript attack;
  SimOptions opts;
};

struct TrialResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  SimReport report;
};

/// Runs every spec on a pool of `threads` workers. Each trial is isolated;
/// results land in spec order regardless of completion order.
inline std::vector<TrialResult> run_trials(const std::vector<TrialSpec>& specs, unsigned threads = 1) {
  std::vector<TrialResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      auto& out = results[i];
      const auto& spec = specs[i];
      out.seed = spec.cfg.seed;
      try {
        auto opts = spec.opts;
        opts.trace = nullptr;
        const auto topo = deploy(spec.cfg, spec.mode, spec.cfg.seed);
        out.report = run_key_establishment(topo, spec.cfg, spec.attack, opts);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(specs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

struct Stat {
  double mean = 0;
  double stddev = 0;  // sample standard deviation
  double min = 0;
  double max = 0;
};

/// Order-insensitive: values are sorted before summation.
inline Stat summarize(std::vector<double> v) {
  Stat s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double sq = 0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  return s;
}

struct Aggregate {
  std::size_t trials = 0;
  std::size_t failed = 0;
  Stat connectivity;
  Stat sensor_energy_uj;  // mean per sensor
  Stat tp_energy_uj;      // mean per third party
  Stat messages_sent;
  Stat mean_degree;
};

inline Aggregate aggregate(const std::vector<TrialResult>& results) {
  Aggregate a;
  a.trials = results.size();
  std::vector<double> conn, se, te, msg, deg;
  for (const auto& r : results) {
    if (!r.ok) {
      ++a.failed;
      continue;
    }
    conn.push_back(r.report.empirical_local_connectivity);
    se.push_back(r.report.sensor.energy_mean_uj);
    te.push_back(r.report.third_party.energy_mean_uj);
    msg.push_back(static_cast<double>(r.report.messages_sent));
    deg.push_back(r.report.mean_degree);
  }
  a.connectivity = summarize(conn);
  a.sensor_energy_uj = summarize(se);
  a.tp_energy_uj = summarize(te);
  a.messages_sent = summarize(msg);
  a.mean_degree = summarize(deg);
  return a;
}

}  // namespace tpka

#endif  // TPKA_SIMULATOR_HPP
