#ifndef TPKA_SELFCHECK_HPP
#define TPKA_SELFCHECK_HPP

// Built-in consistency checks run by `tpka verify`.

#include <cmath>
#include <string>
#include <vector>

#include "tpka/config.hpp"
#include "tpka/coverage_mc.hpp"
#include "tpka/crypto.hpp"
#include "tpka/geometry.hpp"
#include "tpka/report_io.hpp"

namespace tpka {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quadrature against the reference constant and against the independent
/// Monte Carlo estimate (3 standard errors).
inline std::vector<CheckResult> check_coefficients(const VerifyConfig& v, std::uint64_t seed = 1) {
  std::vector<CheckResult> out;
  for (auto s : geometry::kScenarios) {
    const auto q = geometry::expected_coverage(s);
    const double ref = v.reference(s);
    const auto mc = geometry::coverage_monte_carlo(geometry::reach_multiplier(s), v.mc_samples, seed + 17 * static_cast<std::uint64_t>(s));
    const double z = std::abs(mc.coefficient - q.value) / mc.standard_error;
    const bool ref_ok = std::abs(q.value - ref) <= v.tolerance;
    const bool mc_ok = z <= 3.0;
    const std::string sc(1, geometry::scenario_name(s));
    out.push_back({"coefficient " + sc + " vs reference", ref_ok,
                   "quadrature " + fmt(q.value) + " reference " + fmt(ref)});
    out.push_back({"coefficient " + sc + " vs monte carlo", mc_ok,
                   "monte carlo " + fmt(mc.coefficient) + " z " + fmt(z)});
  }
  return out;
}

inline CheckResult check_session_agreement(std::uint64_t samples, std::uint64_t seed = 1) {
  KeyStream rng(seed);
  std::uint64_t agree = 0;
  for (std::uint64_t k = 0; k < samples; ++k) {
    const Key128 s = random_key(rng);
    const Key128 a = random_key(rng);
    NodeId i{rng.next_u64()};
    NodeId j{rng.next_u64()};
    if (i == j) j = NodeId{i.value + 1};
    const auto ki = derive_node_keys(s, a, i);
    const auto kj = derive_node_keys(s, a, j);
    const auto share = make_secret_share(ki.s, kj.s, i, j);
    if (session_key_initiator(share, ki.s, j) == session_key_responder(kj.s, i)) ++agree;
  }
  return {"session agreement", agree == samples, std::to_string(agree) + "/" + std::to_string(samples)};
}

/// Every disclosed link verifies in order; replays of old links, skipped
/// links beyond the lookahead and random forgeries are rejected.
inline CheckResult check_chain_replay(std::uint64_t samples, std::uint64_t seed = 1) {
  KeyStream rng(seed);
  std::uint64_t failures = 0;
  for (std::uint64_t k = 0; k < samples; ++k) {
    auto chain = chain_generate(random_key(rng), 8);
    Key128 stored = chain.anchor();
    std::vector<Key128> seen;
    while (!chain.exhausted()) {
      const Key128 link = chain.disclose();
      for (const auto& old : seen) {
        if (chain_verify_and_advance(stored, old, 1).accepted) ++failures;
      }
      if (chain_verify_and_advance(stored, random_key(rng)).accepted) ++failures;
      const auto c = chain_verify_and_advance(stored, link, 1);
      if (!c.accepted) ++failures;
      stored = c.new_stored;
      seen.push_back(link);
    }
  }
  return {"hash chain replay", failures == 0, std::to_string(failures) + " failures over " + std::to_string(samples) + " chains"};
}

inline std::vector<CheckResult> run_self_checks(const VerifyConfig& v) {
  auto out = check_coefficients(v);
  out.push_back(check_session_agreement(v.agreement_samples));
  out.push_back(check_chain_replay(v.chain_samples));
  return out;
}

}  // namespace tpka

#endif  // TPKA_SELFCHECK_HPP
