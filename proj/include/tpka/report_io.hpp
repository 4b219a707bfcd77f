#ifndef TPKA_REPORT_IO_HPP
#define TPKA_REPORT_IO_HPP

// JSON and CSV serialisation of run outputs, attack-script parsing and run
// manifests. Every CSV starts with a "# schema=N manifest=HASH" comment line.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpka/crypto.hpp"
#include "tpka/geometry.hpp"
#include "tpka/simulator.hpp"

namespace tpka {

inline constexpr int kSchemaVersion = 1;

using ojson = nlohmann::ordered_json;

inline std::string sha256_hex(std::string_view text) {
  const auto digest =
      detail::sha256_parts({std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())});
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (auto b : digest) {
    out += digits[b >> 4];
    out += digits[b & 15];
  }
  return out;
}

/// Fixed "%.12g" formatting so CSVs diff cleanly across runs.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_text;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string extra;  // e.g. attack script contents
  int schema = kSchemaVersion;

  ojson to_json() const {
    ojson j;
    j["schema"] = schema;
    j["command"] = command;
    j["config_path"] = config_path;
    j["config_sha256"] = sha256_hex(config_text);
    j["seeds"] = seeds;
    j["out_dir"] = out_dir;
    j["extra_sha256"] = sha256_hex(extra);
    return j;
  }

  /// Content hash over the canonical manifest document. The output
  /// directory is not an input, so it stays out of the hash.
  std::string hash() const {
    auto j = to_json();
    j.erase("out_dir");
    return sha256_hex(j.dump());
  }
};

inline std::string csv_preamble(const std::string& manifest_hash) {
  return "# schema=" + std::to_string(kSchemaVersion) + " manifest=" + manifest_hash + "\n";
}

// ---------------------------------------------------------------------------
// SimReport

inline ojson to_json(const OpCounters& c) {
  ojson j;
  for (const auto& [name, op] : {std::pair{"encrypt", &c.encrypt}, std::pair{"decrypt", &c.decrypt},
                                 std::pair{"hash", &c.hash}, std::pair{"keygen", &c.keygen},
                                 std::pair{"transmit", &c.transmit}, std::pair{"receive", &c.receive}}) {
    j[name] = op->ops;
  }
  return j;
}

inline ojson to_json(const EnergyBreakdown& e) {
  ojson j;
  j["encrypt"] = e.encrypt;
  j["decrypt"] = e.decrypt;
  j["hash"] = e.hash;
  j["keygen"] = e.keygen;
  j["transmit"] = e.transmit;
  j["receive"] = e.receive;
  j["computation"] = e.computation();
  j["communication"] = e.communication();
  j["total"] = e.total();
  return j;
}

inline ojson to_json(const EnergyModel& m) {
  ojson j;
  j["costs_uj_per_byte"] = {{"encrypt", m.encrypt_uj}, {"decrypt", m.decrypt_uj}, {"hash", m.hash_uj},
                            {"keygen", m.keygen_uj},   {"receive", m.receive_uj}, {"transmit", m.transmit_uj}};
  j["sizes_bytes"] = {{"header", m.header_bytes}, {"id", m.id_bytes},   {"key", m.key_bytes},
                      {"nonce", m.nonce_bytes},   {"tag", m.tag_bytes}};
  return j;
}

inline ojson to_json(const RoleSummary& s) {
  ojson j;
  j["nodes"] = s.nodes;
  j["messages"] = {{"sent", s.messages_sent}, {"received", s.messages_received}};
  j["ops_agreement"] = to_json(s.agreement);
  j["ops_discovery"] = to_json(s.discovery);
  j["ops_relay"] = to_json(s.relay);
  j["energy_uj"] = to_json(s.energy);
  j["energy_uj_per_node"] = {{"mean", s.energy_mean_uj}, {"min", s.energy_min_uj}, {"max", s.energy_max_uj}};
  j["memory_bits"] = s.memory_bits;
  j["memory_bits_final"] = s.memory_bits_final;
  j["link_state_bits_mean"] = s.link_state_bits_mean;
  j["requesters_served"] = s.requesters_served;
  return j;
}

inline ojson to_json(const CapturePoint& p) {
  ojson j;
  j["captured"] = p.captured;
  j["captured_sensors"] = p.captured_sensors;
  j["captured_tps"] = p.captured_tps;
  j["captured_fraction"] = p.captured_fraction;
  j["compromised_links"] = p.compromised_links;
  j["compromised_link_fraction"] = p.compromised_link_fraction;
  j["noncaptured_links"] = p.noncaptured_links;
  j["compromised_noncaptured_links"] = p.compromised_noncaptured_links;
  j["compromised_noncaptured_fraction"] = p.compromised_noncaptured_fraction;
  return j;
}

inline ojson to_json(const SimReport& r, const std::string& manifest_hash = {}) {
  ojson j;
  j["schema"] = SimReport::schema;
  if (!manifest_hash.empty()) j["manifest"] = manifest_hash;
  j["seed"] = r.seed;
  j["scenario"] = std::string(1, r.scenario);
  j["edge_mode"] = r.edge_mode;
  j["sensors"] = r.sensors;
  j["third_parties"] = r.third_parties;
  j["area"] = r.area;
  j["radius"] = r.radius;
  j["density"] = r.density;
  j["mean_degree"] = r.mean_degree;
  j["edges"] = r.edges;
  j["handshake_links"] = r.handshake_links;
  j["established_links"] = r.established_links;
  j["partial_links"] = r.partial_links;
  j["empirical_local_connectivity"] = r.empirical_local_connectivity;
  j["sensors_with_tp"] = r.sensors_with_tp;
  j["requests_sent"] = r.requests_sent;
  j["relayed_frames"] = r.relayed_frames;
  j["modeled_relay_frames"] = r.modeled_relay_frames;
  j["refused_requests"] = r.refused_requests;
  j["failed_exchanges"] = r.failed_exchanges;
  j["messages"] = {{"sent", r.messages_sent}, {"delivered", r.messages_delivered}, {"dropped", r.messages_dropped}};
  ojson tags = ojson::object();
  for (const auto& [tag, n] : r.messages_by_tag) tags[tag] = n;
  j["messages_by_tag"] = tags;
  j["sensor"] = to_json(r.sensor);
  j["third_party"] = to_json(r.third_party);
  ojson counts = ojson::array();
  for (const auto& c : r.operation_counts) {
    counts.push_back({{"role", c.role}, {"op", c.op}, {"observed", c.observed}, {"expected", c.expected},
                      {"relative_gap", c.relative_gap}});
  }
  j["operation_counts"] = counts;
  j["energy_uj_per_node"] = r.energy_uj_per_node;
  j["injected_adverts"] = r.injected_adverts;
  j["impersonation_acceptances"] = r.impersonation_acceptances;
  j["rejected_adverts"] = r.rejected_adverts;
  j["duplicate_adverts"] = r.duplicate_adverts;
  ojson timeline = ojson::array();
  for (const auto& p : r.capture_timeline) timeline.push_back(to_json(p));
  j["capture_timeline"] = timeline;
  j["final_round"] = r.final_round;
  j["energy_model"] = to_json(r.energy_model);
  return j;
}

// ---------------------------------------------------------------------------
// Attack scripts
//
// Either a bare list or {"schema": 1, "actions": [...]}, each action
//   {"round": R, "action": NAME, "params": {...}}
// with params {"id"} for captures, {"x", "y"} for injections, plus
// "link_round" for replays, and optional {"id"} for redeploy.

inline AttackScript parse_attack_script(const nlohmann::json& doc) {
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("schema") || !doc["schema"].is_number_integer() || doc["schema"].get<int>() != kSchemaVersion) {
      throw Error(Errc::invalid_config, "attack script: unsupported or missing schema");
    }
    if (!doc.contains("actions")) throw Error(Errc::invalid_config, "attack script: missing actions");
    list = &doc["actions"];
  }
  if (!list->is_array()) throw Error(Errc::invalid_config, "attack script: actions must be a list");

  AttackScript script;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& item = (*list)[i];
    const std::string where = "attack script action " + std::to_string(i) + ": ";
    try {
      AttackAction a;
      a.round = item.at("round").get<Round>();
      a.kind = parse_attack_kind(item.at("action").get<std::string>());
      const nlohmann::json params = item.contains("params") ? item["params"] : nlohmann::json::object();
      switch (a.kind) {
        case AttackKind::capture_sensor:
        case AttackKind::capture_tp: a.target = NodeId{params.at("id").get<std::uint64_t>()}; break;
        case AttackKind::redeploy:
          if (params.contains("id")) a.target = NodeId{params["id"].get<std::uint64_t>()};
          break;
        case AttackKind::replay_advert:
          a.link_round = params.at("link_round").get<Round>();
          [[fallthrough]];
        case AttackKind::inject_forged_advert:
          a.near = {params.at("x").get<double>(), params.at("y").get<double>()};
          break;
      }
      script.actions.push_back(a);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config, where + e.what());
    } catch (const Error& e) {
      throw Error(Errc::invalid_config, where + e.what());
    }
  }
  return script;
}

inline ojson to_json(const AttackScript& script) {
  ojson actions = ojson::array();
  for (const auto& a : script.actions) {
    ojson params = ojson::object();
    switch (a.kind) {
      case AttackKind::capture_sensor:
      case AttackKind::capture_tp: params["id"] = a.target.value; break;
      case AttackKind::redeploy:
        if (a.target.value != 0) params["id"] = a.target.value;
        break;
      case AttackKind::replay_advert:
        params["x"] = a.near.x;
        params["y"] = a.near.y;
        params["link_round"] = a.link_round;
        break;
      case AttackKind::inject_forged_advert:
        params["x"] = a.near.x;
        params["y"] = a.near.y;
        break;
    }
    actions.push_back({{"round", a.round}, {"action", attack_kind_name(a.kind)}, {"params", params}});
  }
  ojson j;
  j["schema"] = kSchemaVersion;
  j["actions"] = actions;
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_curve_csv(std::ostream& out, const std::vector<geometry::CurvePoint>& points,
                            const std::string& manifest_hash) {
  out << csv_preamble(manifest_hash) << "scenario,d,n,t,ratio,p_local\n";
  for (const auto& p : points) {
    out << geometry::scenario_name(p.scenario) << ',' << fmt(p.density) << ',' << p.sensors << ','
        << p.third_parties << ',' << fmt(p.ratio) << ',' << fmt(p.p_local) << '\n';
  }
}

inline void write_timeline_csv(std::ostream& out, const SimReport& r, const std::string& manifest_hash) {
  out << csv_preamble(manifest_hash)
      << "captured,captured_sensors,captured_tps,captured_fraction,compromised_links,compromised_fraction,"
         "compromised_noncaptured_links,compromised_noncaptured_fraction,injected_adverts,"
         "impersonation_acceptances\n";
  for (const auto& p : r.capture_timeline) {
    out << p.captured << ',' << p.captured_sensors << ',' << p.captured_tps << ',' << fmt(p.captured_fraction) << ','
        << p.compromised_links << ',' << fmt(p.compromised_link_fraction) << ',' << p.compromised_noncaptured_links
        << ',' << fmt(p.compromised_noncaptured_fraction) << ',' << r.injected_adverts << ','
        << r.impersonation_acceptances << '\n';
  }
}

inline void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& results,
                             const std::string& manifest_hash) {
  out << csv_preamble(manifest_hash)
      << "seed,status,scenario,edge_mode,n,t,mean_degree,connectivity,sensor_energy_uj,tp_energy_uj,messages_sent,"
         "messages_dropped,error\n";
  for (const auto& r : results) {
    const auto& p = r.report;
    out << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << p.scenario << ',' << p.edge_mode << ',' << p.sensors << ',' << p.third_parties << ','
          << fmt(p.mean_degree) << ',' << fmt(p.empirical_local_connectivity) << ',' << fmt(p.sensor.energy_mean_uj)
          << ',' << fmt(p.third_party.energy_mean_uj) << ',' << p.messages_sent << ',' << p.messages_dropped << ',';
    } else {
      out << ",,,,,,,,,,";
    }
    std::string err = r.error;
    for (auto& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << err << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& out, const Aggregate& a, const std::string& manifest_hash) {
  out << csv_preamble(manifest_hash) << "metric,trials,failed,mean,stddev,min,max\n";
  auto row = [&](const char* name, const Stat& s) {
    out << name << ',' << a.trials << ',' << a.failed << ',' << fmt(s.mean) << ',' << fmt(s.stddev) << ','
        << fmt(s.min) << ',' << fmt(s.max) << '\n';
  };
  row("connectivity", a.connectivity);
  row("sensor_energy_uj", a.sensor_energy_uj);
  row("tp_energy_uj", a.tp_energy_uj);
  row("messages_sent", a.messages_sent);
  row("mean_degree", a.mean_degree);
}

}  // namespace tpka

#endif  // TPKA_REPORT_IO_HPP
