#ifndef TPKA_GEOMETRY_HPP
#define TPKA_GEOMETRY_HPP

// Local-connectivity analysis for uniformly deployed sensors and third
// parties, ignoring field edges.
//
// A neighbour pair at distance x can be keyed when some third party lies in
// the union of two discovery disks of radius rho centred on the pair:
//   union(rho, x) = 2 pi rho^2 - lens(rho, x)
//   lens(rho, x)  = 2 rho^2 acos(x / 2 rho) - (x / 2) sqrt(4 rho^2 - x^2)
// with rho = R (scenario A), 3R/2 (B) or 2R (C). Averaging over the
// neighbour distance density f(x) = 2x / R^2 gives c(scenario) pi R^2, and
// with pi R^2 / G = d / n
//   p_local = 1 - (1 - c d / n)^t.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tpka/key.hpp"

namespace tpka::geometry {

enum class Scenario { A, B, C };

inline constexpr std::array<Scenario, 3> kScenarios{Scenario::A, Scenario::B, Scenario::C};

inline char scenario_name(Scenario s) {
  switch (s) {
    case Scenario::A: return 'A';
    case Scenario::B: return 'B';
    case Scenario::C: return 'C';
  }
  return '?';
}

inline Scenario parse_scenario(std::string_view text) {
  if (text == "A" || text == "a") return Scenario::A;
  if (text == "B" || text == "b") return Scenario::B;
  if (text == "C" || text == "c") return Scenario::C;
  throw Error(Errc::invalid_config, "scenario must be A, B or C, got '" + std::string(text) + "'");
}

/// Discovery radius as a multiple of R: direct, non-dense two-hop, dense
/// two-hop.
inline double reach_multiplier(Scenario s) {
  switch (s) {
    case Scenario::A: return 1.0;
    case Scenario::B: return 1.5;
    case Scenario::C: return 2.0;
  }
  return 1.0;
}

/// Coefficients (units of pi R^2) as published for the three scenarios.
inline double published_coefficient(Scenario s) {
  switch (s) {
    case Scenario::A: return 1.413497;
    case Scenario::B: return 2.87947;
    case Scenario::C: return 4.84349;
  }
  return 0.0;
}

struct DeploymentConfig {
  double area = 1.0e6;  // G, square field of side sqrt(G)
  double radius = 0.0;  // R; derived from density when not overridden
  std::uint64_t sensors = 10000;
  std::uint64_t third_parties = 1000;
  double density = 40.0;  // d
  Scenario scenario = Scenario::A;
  std::uint64_t seed = 1;
  bool radius_overridden = false;

  double side() const { return std::sqrt(area); }

  /// R = sqrt(d G / (pi n)) unless R was fixed explicitly.
  double effective_radius() const {
    if (radius_overridden) return radius;
    return std::sqrt(density * area / (std::numbers::pi * static_cast<double>(sensors)));
  }

  /// d implied by (R, G, n); equals `density` when R is derived.
  double effective_density() const {
    if (!radius_overridden) return density;
    return std::numbers::pi * radius * radius / area * static_cast<double>(sensors);
  }

  void validate() const {
    if (sensors < 2) throw Error(Errc::invalid_config, "sensors must be >= 2");
    if (!(area > 0)) throw Error(Errc::invalid_config, "area must be > 0");
    if (radius_overridden && !(radius > 0)) throw Error(Errc::invalid_config, "radius must be > 0");
    const double d = effective_density();
    if (!(d > 0) || !(d < static_cast<double>(sensors))) {
      throw Error(Errc::invalid_config, "density must satisfy 0 < d < n");
    }
  }
};

inline void check_domain(double x, double r) {
  if (!(x >= 0.0) || !(x <= r)) {
    throw Error(Errc::domain_error, "distance " + std::to_string(x) + " outside [0, " + std::to_string(r) + "]");
  }
}

/// Distance density of a neighbour placed uniformly in the range disk.
inline double neighbor_distance_pdf(double x, double r) {
  check_domain(x, r);
  return 2.0 * x / (r * r);
}

/// Intersection area of two disks of radius rho whose centres are x apart.
inline double lens_area(double rho, double x) {
  if (x >= 2.0 * rho) return 0.0;
  return 2.0 * rho * rho * std::acos(x / (2.0 * rho)) - 0.5 * x * std::sqrt(4.0 * rho * rho - x * x);
}

inline double union_area(Scenario s, double x, double r) {
  check_domain(x, r);
  const double rho = reach_multiplier(s) * r;
  return 2.0 * std::numbers::pi * rho * rho - lens_area(rho, x);
}

struct CoverageCoefficient {
  Scenario scenario;
  double value;      // multiple of pi R^2
  double abs_error;  // quadrature error estimate, same units
};

/// E[union_area] over the neighbour distance density, in units of pi R^2.
inline CoverageCoefficient expected_coverage(Scenario s, double r = 1.0) {
  const double unit = std::numbers::pi * r * r;
  auto integrand = [&](double x) { return union_area(s, x, r) * neighbor_distance_pdf(x, r); };
  double err = 0.0;
  const double tol = 1e-8 * unit;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, 0.0, r, 15, tol / unit, &err);
  return {s, value / unit, err / unit};
}

struct Connectivity {
  double p_local = 0.0;
  double p_single = 0.0;  // probability one third party covers the pair
  bool saturated = false;
};

/// 1 - (1 - c d / n)^t, clamped when c d / n >= 1.
inline Connectivity local_connectivity(double coefficient, double density, double sensors, double third_parties) {
  Connectivity out;
  out.p_single = coefficient * density / sensors;
  if (out.p_single >= 1.0) {
    out.p_single = 1.0;
    out.saturated = true;
  }
  out.p_local = 1.0 - std::pow(1.0 - out.p_single, third_parties);
  return out;
}

inline Connectivity local_connectivity_analytic(const DeploymentConfig& cfg, std::optional<double> coefficient = {}) {
  const double c = coefficient.value_or(expected_coverage(cfg.scenario).value);
  return local_connectivity(c, cfg.effective_density(), static_cast<double>(cfg.sensors),
                            static_cast<double>(cfg.third_parties));
}

/// P(Z = z) for Z ~ Binomial(t, p): number of third parties in the region.
inline double binomial_pmf(std::uint64_t t, std::uint64_t z, double p) {
  if (z > t) return 0.0;
  const double td = static_cast<double>(t);
  const double zd = static_cast<double>(z);
  const double coef = std::exp(std::lgamma(td + 1.0) - std::lgamma(zd + 1.0) - std::lgamma(td - zd + 1.0));
  return coef * std::pow(p, zd) * std::pow(1.0 - p, td - zd);
}

/// Smallest (real) third-party count with p_local >= target, found by
/// bracketing root search on the connectivity formula.
inline double third_parties_for(double coefficient, double density, double sensors, double target) {
  if (!(target > 0.0 && target < 1.0)) throw Error(Errc::domain_error, "target must be in (0, 1)");
  auto gap = [&](double t) { return local_connectivity(coefficient, density, sensors, t).p_local - target; };
  double hi = 1.0;
  while (gap(hi) < 0.0) hi *= 2.0;
  std::uintmax_t iterations = 200;
  auto bracket = boost::math::tools::toms748_solve(gap, 0.0, hi, boost::math::tools::eps_tolerance<double>(50),
                                                   iterations);
  return 0.5 * (bracket.first + bracket.second);
}

struct CurvePoint {
  Scenario scenario;
  double density;
  std::uint64_t sensors;
  std::uint64_t third_parties;
  double ratio;
  double p_local;
};

struct Sweep {
  std::vector<Scenario> scenarios{Scenario::A, Scenario::B, Scenario::C};
  std::vector<double> densities{20.0, 40.0};
  std::uint64_t sensors = 10000;
  double ratio_min = 0.0;
  double ratio_max = 0.4;
  double ratio_step = 0.01;
};

/// p_local against t / n for every (scenario, density) of the sweep.
inline std::vector<CurvePoint> connectivity_curve(const Sweep& sweep) {
  if (!(sweep.ratio_step > 0.0) || sweep.ratio_max < sweep.ratio_min || sweep.ratio_min < 0.0 || sweep.sensors < 2) {
    throw Error(Errc::invalid_config, "invalid sweep bounds");
  }
  std::vector<CurvePoint> out;
  const auto steps = static_cast<std::uint64_t>(std::floor((sweep.ratio_max - sweep.ratio_min) / sweep.ratio_step + 1e-9));
  const double n = static_cast<double>(sweep.sensors);
  for (auto s : sweep.scenarios) {
    const double c = expected_coverage(s).value;
    for (double d : sweep.densities) {
      for (std::uint64_t k = 0; k <= steps; ++k) {
        const double ratio = sweep.ratio_min + static_cast<double>(k) * sweep.ratio_step;
        const auto t = static_cast<std::uint64_t>(std::llround(ratio * n));
        out.push_back({s, d, sweep.sensors, t, ratio, local_connectivity(c, d, n, static_cast<double>(t)).p_local});
      }
    }
  }
  return out;
}

}  // namespace tpka::geometry

#endif  // TPKA_GEOMETRY_HPP
