#ifndef TPKA_CONFIG_HPP
#define TPKA_CONFIG_HPP

// INI run configuration.
//
//   [deployment]  area radius sensors third_parties tp_ratio density
//                 scenario seed edge_mode
//   [protocol]    chain_length lookahead tk_round advert_until batching
//                 loss_rate
//   [energy]      encrypt_uj decrypt_uj hash_uj keygen_uj receive_uj
//                 transmit_uj header_bytes id_bytes key_bytes nonce_bytes
//                 tag_bytes
//   [sweep]       scenarios densities sensors ratio_min ratio_max ratio_step
//   [verify]      mc_samples agreement_samples chain_samples
//                 coefficient_a coefficient_b coefficient_c tolerance
//   [run]         threads
//
// Unknown sections or keys are rejected with the offending line.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tpka/geometry.hpp"
#include "tpka/simulator.hpp"
#include "tpka/topology.hpp"

namespace tpka {

struct VerifyConfig {
  std::uint64_t mc_samples = 2'000'000;
  std::uint64_t agreement_samples = 10'000;
  std::uint64_t chain_samples = 1'000;
  double coefficient_a = 1.413497;
  double coefficient_b = 2.87947;
  double coefficient_c = 4.84349;
  double tolerance = 1e-4;

  double reference(geometry::Scenario s) const {
    switch (s) {
      case geometry::Scenario::A: return coefficient_a;
      case geometry::Scenario::B: return coefficient_b;
      case geometry::Scenario::C: return coefficient_c;
    }
    return 0.0;
  }
};

struct RunConfig {
  geometry::DeploymentConfig deployment;
  EdgeMode edge_mode = EdgeMode::torus;
  SimOptions protocol;
  geometry::Sweep sweep;
  VerifyConfig verify;
  unsigned threads = 1;

  std::string source;  // path or label
  std::string text;    // raw contents, hashed into run manifests
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"deployment", {"area", "radius", "sensors", "third_parties", "tp_ratio", "density", "scenario", "seed", "edge_mode"}},
      {"protocol", {"chain_length", "lookahead", "tk_round", "advert_until", "batching", "loss_rate"}},
      {"energy",
       {"encrypt_uj", "decrypt_uj", "hash_uj", "keygen_uj", "receive_uj", "transmit_uj", "header_bytes", "id_bytes",
        "key_bytes", "nonce_bytes", "tag_bytes"}},
      {"sweep", {"scenarios", "densities", "sensors", "ratio_min", "ratio_max", "ratio_step"}},
      {"verify",
       {"mc_samples", "agreement_samples", "chain_samples", "coefficient_a", "coefficient_b", "coefficient_c",
        "tolerance"}},
      {"run", {"threads"}},
  };
  return schema;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// "section.key" -> line number, for diagnostics.
inline std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      out.emplace(section, n);
      continue;
    }
    const auto eq = line.find('=');
    if (eq != std::string::npos) out.emplace(section + "." + trim(line.substr(0, eq)), n);
  }
  return out;
}

class FieldReader {
 public:
  FieldReader(const boost::property_tree::ptree& tree, std::string source, std::map<std::string, int> lines)
      : tree_(tree), source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& message) const {
    std::string where = source_;
    if (auto it = lines_.find(field); it != lines_.end()) where += ":" + std::to_string(it->second);
    throw Error(Errc::invalid_config, where + ": " + field + ": " + message);
  }

  std::optional<std::string> raw(const std::string& field) const {
    auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(field, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <typename T>
  void read(const std::string& field, T& out) const {
    const auto text = raw(field);
    if (!text) return;
    std::istringstream in(*text);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) fail(field, "cannot parse '" + *text + "'");
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(value)) fail(field, "must be finite");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (text->find('-') != std::string::npos) fail(field, "must be non-negative");
    }
    out = value;
  }

  template <typename T>
  std::vector<T> list(const std::string& field, std::vector<T> fallback) const {
    const auto text = raw(field);
    if (!text) return fallback;
    std::vector<T> out;
    std::istringstream in(*text);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(field, "empty list item");
      if constexpr (std::is_same_v<T, std::string>) {
        out.push_back(item);
      } else {
        std::istringstream iv(item);
        T v{};
        iv >> v;
        if (iv.fail() || !(iv >> std::ws).eof()) fail(field, "cannot parse list item '" + item + "'");
        out.push_back(v);
      }
    }
    if (out.empty()) fail(field, "list is empty");
    return out;
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::string source_;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parses INI text. `source` labels diagnostics ("file:line: field: ...").
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::invalid_config, source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  detail::FieldReader f(tree, source, detail::key_lines(text));
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : tree) {
    auto it = schema.find(section);
    if (it == schema.end()) {
      if (body.empty()) f.fail(section, "top-level keys must sit inside a section");
      f.fail(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) f.fail(section + "." + key, "unknown key");
    }
  }

  RunConfig cfg;
  cfg.source = source;
  cfg.text = text;
  auto& d = cfg.deployment;

  f.read("deployment.area", d.area);
  if (f.raw("deployment.radius")) {
    f.read("deployment.radius", d.radius);
    d.radius_overridden = true;
  }
  f.read("deployment.sensors", d.sensors);
  f.read("deployment.density", d.density);
  f.read("deployment.seed", d.seed);
  if (f.raw("deployment.third_parties") && f.raw("deployment.tp_ratio")) {
    f.fail("deployment.tp_ratio", "give either third_parties or tp_ratio, not both");
  }
  f.read("deployment.third_parties", d.third_parties);
  if (f.raw("deployment.tp_ratio")) {
    double ratio = 0;
    f.read("deployment.tp_ratio", ratio);
    if (ratio < 0) f.fail("deployment.tp_ratio", "must be >= 0");
    d.third_parties = static_cast<std::uint64_t>(std::llround(ratio * static_cast<double>(d.sensors)));
  }
  try {
    if (auto s = f.raw("deployment.scenario")) d.scenario = geometry::parse_scenario(*s);
  } catch (const Error& e) {
    f.fail("deployment.scenario", e.what());
  }
  try {
    if (auto s = f.raw("deployment.edge_mode")) cfg.edge_mode = parse_edge_mode(*s);
  } catch (const Error& e) {
    f.fail("deployment.edge_mode", e.what());
  }
  try {
    d.validate();
  } catch (const Error& e) {
    f.fail("deployment", e.what());
  }

  auto& p = cfg.protocol;
  f.read("protocol.chain_length", p.chain_length);
  f.read("protocol.lookahead", p.lookahead);
  f.read("protocol.tk_round", p.tk_round);
  f.read("protocol.advert_until", p.advert_until);
  f.read("protocol.loss_rate", p.loss_rate);
  if (auto b = f.raw("protocol.batching")) {
    if (*b == "per_neighbor") {
      p.batching = RequestBatching::per_neighbor;
    } else if (*b == "batched") {
      p.batching = RequestBatching::batched;
    } else {
      f.fail("protocol.batching", "must be per_neighbor or batched");
    }
  }

  auto& e = p.energy;
  f.read("energy.encrypt_uj", e.encrypt_uj);
  f.read("energy.decrypt_uj", e.decrypt_uj);
  f.read("energy.hash_uj", e.hash_uj);
  f.read("energy.keygen_uj", e.keygen_uj);
  f.read("energy.receive_uj", e.receive_uj);
  f.read("energy.transmit_uj", e.transmit_uj);
  f.read("energy.header_bytes", e.header_bytes);
  f.read("energy.id_bytes", e.id_bytes);
  f.read("energy.key_bytes", e.key_bytes);
  f.read("energy.nonce_bytes", e.nonce_bytes);
  f.read("energy.tag_bytes", e.tag_bytes);
  try {
    p.validate();
  } catch (const Error& err) {
    f.fail("protocol", err.what());
  }

  auto& s = cfg.sweep;
  std::vector<geometry::Scenario> scenarios;
  for (const auto& name : f.list<std::string>("sweep.scenarios", {"A", "B", "C"})) {
    try {
      scenarios.push_back(geometry::parse_scenario(name));
    } catch (const Error& err) {
      f.fail("sweep.scenarios", err.what());
    }
  }
  s.scenarios = scenarios;
  s.densities = f.list<double>("sweep.densities", s.densities);
  f.read("sweep.sensors", s.sensors);
  f.read("sweep.ratio_min", s.ratio_min);
  f.read("sweep.ratio_max", s.ratio_max);
  f.read("sweep.ratio_step", s.ratio_step);
  if (!(s.ratio_step > 0)) f.fail("sweep.ratio_step", "must be > 0");
  if (s.ratio_min < 0 || s.ratio_max < s.ratio_min) f.fail("sweep.ratio_max", "need 0 <= ratio_min <= ratio_max");
  for (double dd : s.densities) {
    if (!(dd > 0 && dd < static_cast<double>(s.sensors))) f.fail("sweep.densities", "each density must satisfy 0 < d < n");
  }

  auto& v = cfg.verify;
  f.read("verify.mc_samples", v.mc_samples);
  f.read("verify.agreement_samples", v.agreement_samples);
  f.read("verify.chain_samples", v.chain_samples);
  f.read("verify.coefficient_a", v.coefficient_a);
  f.read("verify.coefficient_b", v.coefficient_b);
  f.read("verify.coefficient_c", v.coefficient_c);
  f.read("verify.tolerance", v.tolerance);
  if (v.mc_samples < 1000) f.fail("verify.mc_samples", "must be >= 1000");
  if (!(v.tolerance > 0)) f.fail("verify.tolerance", "must be > 0");

  f.read("run.threads", cfg.threads);
  if (cfg.threads == 0) f.fail("run.threads", "must be >= 1");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::invalid_config, path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace tpka

#endif  // TPKA_CONFIG_HPP
