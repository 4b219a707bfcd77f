#ifndef TPKA_COVERAGE_MC_HPP
#define TPKA_COVERAGE_MC_HPP

// Monte Carlo estimate of the expected union coverage, independent of the
// lens formula: draw a neighbour distance x with density 2x / R^2, draw a
// point uniformly in the bounding box of the two disks, and count it when
// it falls inside either disk.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "tpka/crypto.hpp"

namespace tpka::geometry {

struct CoverageEstimate {
  double coefficient;     // mean union area / (pi R^2)
  double standard_error;  // same units
  std::uint64_t samples;
};

inline CoverageEstimate coverage_monte_carlo(double reach, std::uint64_t samples, std::uint64_t seed) {
  KeyStream rng(seed);
  const double r = 1.0;
  const double rho = reach * r;
  const double box_h = 2.0 * rho;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double x = r * std::sqrt(rng.uniform());
    const double box_w = x + 2.0 * rho;
    const double px = -rho + rng.uniform() * box_w;
    const double py = -rho + rng.uniform() * box_h;
    const bool in_first = px * px + py * py <= rho * rho;
    const bool in_second = (px - x) * (px - x) + py * py <= rho * rho;
    const double v = (in_first || in_second) ? box_w * box_h : 0.0;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = (sum_sq / n - mean * mean) * n / (n - 1.0);
  const double unit = std::numbers::pi * r * r;
  return {mean / unit, std::sqrt(var / n) / unit, samples};
}

}  // namespace tpka::geometry

#endif  // TPKA_COVERAGE_MC_HPP
