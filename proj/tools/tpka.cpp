// tpka: command-line front end.
//
//   tpka analyze   analytic connectivity curves
//   tpka simulate  Monte Carlo trials, per-trial JSON plus CSV aggregate
//   tpka attack    resilience curve for an attack script
//   tpka energy    expected (and optionally observed) energy budget
//   tpka verify    built-in self checks
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "tpka/tpka.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  std::string seeds;
  std::string out;
  std::string scenario;
  std::string edge_mode;
  std::string attack;
  bool trace = false;
  unsigned threads = 0;
};

struct Context {
  tpka::RunConfig cfg;
  std::vector<std::uint64_t> seeds;
  bool seeds_given = false;
  fs::path out;
  tpka::RunManifest manifest;
  std::string hash;
};

/// "N" is a count starting at the config seed, "a,b,c" a list, "a-b" a
/// range; list items may also be ranges.
std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t base) {
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw tpka::Error(tpka::Errc::invalid_config, "--seeds: cannot parse '" + s + "'");
    }
    return std::stoull(s);
  };
  std::vector<std::uint64_t> out;
  if (text.find_first_of(",-") == std::string::npos) {
    const auto count = number(text);
    if (count == 0) throw tpka::Error(tpka::Errc::invalid_config, "--seeds: count must be >= 1");
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(base + k);
    return out;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dash));
    const auto hi = number(item.substr(dash + 1));
    if (hi < lo) throw tpka::Error(tpka::Errc::invalid_config, "--seeds: empty range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw tpka::Error(tpka::Errc::invalid_config, "--seeds: no seeds given");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tpka::Error(tpka::Errc::invalid_config, path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Context prepare(const std::string& command, const Options& o, const std::string& extra = {}) {
  Context ctx;
  ctx.cfg = o.config.empty() ? tpka::parse_config("", "<defaults>") : tpka::load_config(o.config);
  if (!o.scenario.empty()) ctx.cfg.deployment.scenario = tpka::geometry::parse_scenario(o.scenario);
  if (!o.edge_mode.empty()) ctx.cfg.edge_mode = tpka::parse_edge_mode(o.edge_mode);
  if (o.threads != 0) ctx.cfg.threads = o.threads;
  ctx.seeds_given = !o.seeds.empty();
  ctx.seeds = ctx.seeds_given ? parse_seeds(o.seeds, ctx.cfg.deployment.seed)
                              : std::vector<std::uint64_t>{ctx.cfg.deployment.seed};

  std::string out = o.out;
  if (out.empty()) {
    const char* env = std::getenv("TPKA_OUT_DIR");
    out = env && *env ? env : "tpka-out";
  }
  ctx.out = out;

  ctx.manifest.command = command;
  ctx.manifest.config_path = o.config;
  // Overrides are part of the inputs, so fold them into the hashed text.
  ctx.manifest.config_text = ctx.cfg.text + "\n;scenario=" + o.scenario + ";edge_mode=" + o.edge_mode;
  ctx.manifest.seeds = ctx.seeds;
  ctx.manifest.out_dir = out;
  ctx.manifest.extra = extra;
  ctx.hash = ctx.manifest.hash();
  return ctx;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_manifest(const Context& ctx) {
  auto j = ctx.manifest.to_json();
  j["manifest"] = ctx.hash;
  write_text(ctx.out / "manifest.json", j.dump(2) + "\n");
}

tpka::geometry::DeploymentConfig with_seed(const tpka::RunConfig& cfg, std::uint64_t seed) {
  auto d = cfg.deployment;
  d.seed = seed;
  return d;
}

// --- commands ---------------------------------------------------------------

int cmd_analyze(const Options& o) {
  auto ctx = prepare("analyze", o);
  const auto points = tpka::geometry::connectivity_curve(ctx.cfg.sweep);
  std::ostringstream csv;
  tpka::write_curve_csv(csv, points, ctx.hash);
  write_text(ctx.out / "analysis.csv", csv.str());
  write_manifest(ctx);
  std::cout << "analyze: " << points.size() << " rows -> " << (ctx.out / "analysis.csv").string() << "\n";
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  auto ctx = prepare("simulate", o);
  std::vector<tpka::TrialSpec> specs;
  for (auto seed : ctx.seeds) specs.push_back({with_seed(ctx.cfg, seed), ctx.cfg.edge_mode, {}, ctx.cfg.protocol});
  const auto results = tpka::run_trials(specs, ctx.cfg.threads);

  if (o.trace && !specs.empty()) {
    std::ostringstream trace;
    auto opts = ctx.cfg.protocol;
    opts.trace = &trace;
    const auto& spec = specs.front();
    tpka::run_key_establishment(tpka::deploy(spec.cfg, spec.mode, spec.cfg.seed), spec.cfg, {}, opts);
    write_text(ctx.out / ("trace_" + std::to_string(spec.cfg.seed) + ".ndjson"), trace.str());
  }

  for (const auto& r : results) {
    if (r.ok) write_text(ctx.out / ("report_" + std::to_string(r.seed) + ".json"), tpka::to_json(r.report, ctx.hash).dump(2) + "\n");
  }
  std::ostringstream trials;
  tpka::write_trials_csv(trials, results, ctx.hash);
  write_text(ctx.out / "trials.csv", trials.str());
  const auto agg = tpka::aggregate(results);
  std::ostringstream agg_csv;
  tpka::write_aggregate_csv(agg_csv, agg, ctx.hash);
  write_text(ctx.out / "aggregate.csv", agg_csv.str());
  write_manifest(ctx);

  std::cout << "simulate: " << agg.trials << " trials, " << agg.failed << " failed, connectivity mean "
            << tpka::fmt(agg.connectivity.mean) << " sd " << tpka::fmt(agg.connectivity.stddev) << "\n";
  for (const auto& r : results) {
    if (!r.ok) std::cerr << "trial seed " << r.seed << " failed: " << r.error << "\n";
  }
  return agg.failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_attack(const Options& o) {
  if (o.attack.empty()) throw tpka::Error(tpka::Errc::invalid_config, "attack: --attack SCRIPT is required");
  const std::string text = read_file(o.attack);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw tpka::Error(tpka::Errc::invalid_config, o.attack + ": " + e.what());
  }
  const auto script = tpka::parse_attack_script(doc);
  auto ctx = prepare("attack", o, text);

  // Validate against every topology before running anything.
  std::vector<tpka::Topology> topologies;
  for (auto seed : ctx.seeds) {
    const auto cfg = with_seed(ctx.cfg, seed);
    topologies.push_back(tpka::deploy(cfg, ctx.cfg.edge_mode, seed));
    script.validate(topologies.back(), ctx.cfg.protocol.chain_length);
  }

  for (std::size_t k = 0; k < ctx.seeds.size(); ++k) {
    const auto seed = ctx.seeds[k];
    const auto report = tpka::run_key_establishment(topologies[k], with_seed(ctx.cfg, seed), script, ctx.cfg.protocol);
    std::ostringstream csv;
    tpka::write_timeline_csv(csv, report, ctx.hash);
    write_text(ctx.out / ("resilience_" + std::to_string(seed) + ".csv"), csv.str());
    write_text(ctx.out / ("attack_report_" + std::to_string(seed) + ".json"), tpka::to_json(report, ctx.hash).dump(2) + "\n");
    const auto& last = report.capture_timeline.back();
    std::cout << "attack seed " << seed << ": captured " << last.captured << ", compromised non-captured fraction "
              << tpka::fmt(last.compromised_noncaptured_fraction) << ", impersonation acceptances "
              << report.impersonation_acceptances << "\n";
  }
  write_manifest(ctx);
  return kExitOk;
}

int cmd_energy(const Options& o) {
  auto ctx = prepare("energy", o);
  const auto& m = ctx.cfg.protocol.energy;
  const double d = ctx.cfg.deployment.effective_density();

  std::map<std::pair<std::string, std::string>, tpka::Stat> observed;
  std::map<std::pair<std::string, std::string>, double> observed_gap;
  if (ctx.seeds_given) {
    std::vector<tpka::TrialSpec> specs;
    for (auto seed : ctx.seeds) specs.push_back({with_seed(ctx.cfg, seed), ctx.cfg.edge_mode, {}, ctx.cfg.protocol});
    const auto results = tpka::run_trials(specs, ctx.cfg.threads);
    std::map<std::pair<std::string, std::string>, std::vector<double>> samples;
    std::map<std::pair<std::string, std::string>, std::vector<double>> expected;
    for (const auto& r : results) {
      if (!r.ok) throw std::runtime_error("trial seed " + std::to_string(r.seed) + " failed: " + r.error);
      for (const auto& c : r.report.operation_counts) {
        samples[{c.role, c.op}].push_back(c.observed);
        expected[{c.role, c.op}].push_back(c.expected);
      }
      samples[{"sensor", "energy_uj"}].push_back(r.report.sensor.energy_mean_uj);
      samples[{"third_party", "energy_uj"}].push_back(r.report.third_party.energy_mean_uj);
    }
    for (auto& [key, v] : samples) {
      observed[key] = tpka::summarize(v);
      if (auto it = expected.find(key); it != expected.end()) {
        const double e = tpka::summarize(it->second).mean;
        observed_gap[key] = e == 0 ? 0.0 : std::abs(observed[key].mean - e) / e;
      }
    }
  }

  std::ostringstream csv;
  csv << tpka::csv_preamble(ctx.hash) << "role,quantity,expected,observed_mean,observed_sd,relative_gap\n";
  auto row = [&](const std::string& role, const std::string& q, double expected) {
    csv << role << ',' << q << ',' << tpka::fmt(expected) << ',';
    if (auto it = observed.find({role, q}); it != observed.end()) {
      csv << tpka::fmt(it->second.mean) << ',' << tpka::fmt(it->second.stddev) << ',';
      auto g = observed_gap.find({role, q});
      csv << (g != observed_gap.end() ? tpka::fmt(g->second) : "") << '\n';
    } else {
      csv << ",,\n";
    }
  };
  auto counts = [&](const std::string& role, const tpka::ExpectedCounts& c, const tpka::EnergyBreakdown& e) {
    row(role, "encrypt", c.encrypt);
    row(role, "decrypt", c.decrypt);
    row(role, "hash", c.hash);
    row(role, "keygen", c.keygen);
    row(role, "transmit", c.transmit);
    row(role, "receive", c.receive);
    csv << role << ",agreement_energy_uj," << tpka::fmt(e.total()) << ",,,\n";
    if (auto it = observed.find({role, "energy_uj"}); it != observed.end()) {
      csv << role << ",total_energy_uj_per_node,," << tpka::fmt(it->second.mean) << ','
          << tpka::fmt(it->second.stddev) << ",\n";
    }
  };
  counts("sensor", tpka::expected_sensor_counts(d), tpka::expected_sensor_energy(d, m));
  counts("third_party", tpka::expected_tp_counts(d), tpka::expected_tp_energy(d, m));
  csv << "model,size_header_bytes," << tpka::fmt(m.header_bytes) << ",,,\n"
      << "model,size_id_bytes," << tpka::fmt(m.id_bytes) << ",,,\n"
      << "model,size_key_bytes," << tpka::fmt(m.key_bytes) << ",,,\n"
      << "model,size_nonce_bytes," << tpka::fmt(m.nonce_bytes) << ",,,\n"
      << "model,size_tag_bytes," << tpka::fmt(m.tag_bytes) << ",,,\n";
  write_text(ctx.out / "energy.csv", csv.str());
  write_manifest(ctx);
  std::cout << csv.str();
  return kExitOk;
}

int cmd_verify(const Options& o) {
  auto ctx = prepare("verify", o);
  const auto checks = tpka::run_self_checks(ctx.cfg.verify);
  bool ok = true;
  std::ostringstream table;
  for (const auto& c : checks) {
    table << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
    ok = ok && c.passed;
  }
  std::cout << table.str();
  std::ostringstream csv;
  csv << tpka::csv_preamble(ctx.hash) << "check,status,detail\n";
  for (const auto& c : checks) csv << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << c.detail << '\n';
  write_text(ctx.out / "verify.csv", csv.str());
  write_manifest(ctx);
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Third-party key agreement toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI run configuration");
    sub->add_option("--seeds", o.seeds, "seed count N, list a,b,c or range a-b");
    sub->add_option("--out", o.out, "output directory (default $TPKA_OUT_DIR or ./tpka-out)");
    sub->add_option("--scenario", o.scenario, "A, B or C");
    sub->add_option("--edge-mode", o.edge_mode, "torus or border");
    sub->add_option("--threads", o.threads, "trial worker threads");
  };
  auto* analyze = app.add_subcommand("analyze", "analytic connectivity curves");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo key-establishment trials");
  auto* attack = app.add_subcommand("attack", "resilience curve for an attack script");
  auto* energy = app.add_subcommand("energy", "energy budget table");
  auto* verify = app.add_subcommand("verify", "self checks");
  for (auto* sub : {analyze, simulate, attack, energy, verify}) common(sub);
  simulate->add_flag("--trace", o.trace, "write an NDJSON event trace for the first seed");
  attack->add_option("--attack", o.attack, "JSON attack script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*analyze) return cmd_analyze(o);
    if (*simulate) return cmd_simulate(o);
    if (*attack) return cmd_attack(o);
    if (*energy) return cmd_energy(o);
    if (*verify) return cmd_verify(o);
  } catch (const tpka::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == tpka::Errc::invalid_config || e.code() == tpka::Errc::domain_error ? kExitValidation
                                                                                          : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
