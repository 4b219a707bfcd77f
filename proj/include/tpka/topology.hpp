#ifndef TPKA_TOPOLOGY_HPP
#define TPKA_TOPOLOGY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tpka/crypto.hpp"
#include "tpka/geometry.hpp"

namespace tpka {

struct Point {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class EdgeMode {
  torus,   // wrap-around field, matches the edge-free analysis
  border,  // hard field boundary
};

inline const char* edge_mode_name(EdgeMode m) { return m == EdgeMode::torus ? "torus" : "border"; }

inline EdgeMode parse_edge_mode(std::string_view text) {
  if (text == "torus") return EdgeMode::torus;
  if (text == "border") return EdgeMode::border;
  throw Error(Errc::invalid_config, "edge mode must be torus or border, got '" + std::string(text) + "'");
}

/// Sensors carry ids 1..n, third parties n+1..n+t.
struct Topology {
  double side = 0;
  double radius = 0;
  EdgeMode mode = EdgeMode::torus;
  std::vector<Point> sensors;
  std::vector<Point> third_parties;
  std::vector<std::vector<std::uint32_t>> adjacency;  // sensor index -> sorted neighbour indices

  NodeId sensor_id(std::size_t i) const { return NodeId{static_cast<std::uint64_t>(i) + 1}; }
  NodeId tp_id(std::size_t k) const { return NodeId{static_cast<std::uint64_t>(sensors.size() + k) + 1}; }
  bool is_sensor(NodeId id) const { return id.value >= 1 && id.value <= sensors.size(); }
  bool is_tp(NodeId id) const {
    return id.value > sensors.size() && id.value <= sensors.size() + third_parties.size();
  }
  std::size_t sensor_index(NodeId id) const { return static_cast<std::size_t>(id.value - 1); }
  std::size_t tp_index(NodeId id) const { return static_cast<std::size_t>(id.value - sensors.size() - 1); }

  double distance(Point a, Point b) const {
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    if (mode == EdgeMode::torus) {
      dx = std::min(dx, side - dx);
      dy = std::min(dy, side - dy);
    }
    return std::sqrt(dx * dx + dy * dy);
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& a : adjacency) twice += a.size();
    return twice / 2;
  }

  double mean_degree() const {
    return sensors.empty() ? 0.0 : 2.0 * static_cast<double>(edge_count()) / static_cast<double>(sensors.size());
  }
};

/// Uniform bucket grid for fixed-radius neighbour queries.
class CellGrid {
 public:
  CellGrid(const Topology& topo, const std::vector<Point>& points, double reach)
      : topo_(topo), points_(points), reach_(reach) {
    cells_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(topo.side / std::max(reach, 1e-300))));
    cells_ = std::min<std::int64_t>(cells_, 4096);
    cell_size_ = topo.side / static_cast<double>(cells_);
    buckets_.assign(static_cast<std::size_t>(cells_ * cells_), {});
    for (std::size_t i = 0; i < points.size(); ++i) {
      buckets_[static_cast<std::size_t>(cell_of(points[i].y) * cells_ + cell_of(points[i].x))].push_back(
          static_cast<std::uint32_t>(i));
    }
  }

  /// Indices within `reach` of p, sorted by (distance, index).
  std::vector<std::pair<double, std::uint32_t>> within(Point p) const {
    std::vector<std::pair<double, std::uint32_t>> out;
    const std::int64_t cx = cell_of(p.x);
    const std::int64_t cy = cell_of(p.y);
    std::vector<std::int64_t> xs;
    std::vector<std::int64_t> ys;
    for (std::int64_t d = -1; d <= 1; ++d) {
      push_axis(xs, cx + d);
      push_axis(ys, cy + d);
    }
    for (auto y : ys) {
      for (auto x : xs) {
        for (auto idx : buckets_[static_cast<std::size_t>(y * cells_ + x)]) {
          const double dist = topo_.distance(p, points_[idx]);
          if (dist <= reach_) out.emplace_back(dist, idx);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::int64_t cell_of(double v) const {
    auto c = static_cast<std::int64_t>(std::floor(v / cell_size_));
    return std::clamp<std::int64_t>(c, 0, cells_ - 1);
  }

  void push_axis(std::vector<std::int64_t>& axis, std::int64_t c) const {
    if (topo_.mode == EdgeMode::torus) {
      c = ((c % cells_) + cells_) % cells_;
    } else if (c < 0 || c >= cells_) {
      return;
    }
    if (std::find(axis.begin(), axis.end(), c) == axis.end()) axis.push_back(c);
  }

  const Topology& topo_;
  const std::vector<Point>& points_;
  double reach_;
  std::int64_t cells_ = 1;
  double cell_size_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

/// Builds the neighbour graph (pairwise distance <= R) for given positions.
inline Topology make_topology(double side, double radius, EdgeMode mode, std::vector<Point> sensors,
                              std::vector<Point> third_parties) {
  Topology topo;
  topo.side = side;
  topo.radius = radius;
  topo.mode = mode;
  topo.sensors = std::move(sensors);
  topo.third_parties = std::move(third_parties);
  topo.adjacency.assign(topo.sensors.size(), {});
  CellGrid grid(topo, topo.sensors, radius);
  for (std::size_t i = 0; i < topo.sensors.size(); ++i) {
    for (const auto& [dist, j] : grid.within(topo.sensors[i])) {
      if (j != i) topo.adjacency[i].push_back(j);
    }
    std::sort(topo.adjacency[i].begin(), topo.adjacency[i].end());
  }
  return topo;
}

/// Uniform i.i.d. placement of n sensors then t third parties.
inline Topology deploy(const geometry::DeploymentConfig& cfg, EdgeMode mode, std::uint64_t seed) {
  cfg.validate();
  KeyStream rng(seed);
  const double side = cfg.side();
  auto place = [&](std::uint64_t count) {
    std::vector<Point> pts;
    pts.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const double x = rng.uniform() * side;
      const double y = rng.uniform() * side;
      pts.push_back({x, y});
    }
    return pts;
  };
  auto sensors = place(cfg.sensors);
  auto tps = place(cfg.third_parties);
  return make_topology(side, cfg.effective_radius(), mode, std::move(sensors), std::move(tps));
}

}  // namespace tpka

#endif  // TPKA_TOPOLOGY_HPP
