#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "gameplan/common.hpp"

namespace gameplan::sim {

/// Piecewise-linear path parameterized by arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidInput("a path needs at least two points");
    cumulative_.assign(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      cumulative_[i] = cumulative_[i - 1] + distance(points_[i - 1], points_[i]);
    }
  }

  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  const std::vector<Vec2>& points() const { return points_; }

  Vec2 point_at(double s) const {
    if (s <= 0.0) return points_.front();
    if (s >= length()) return points_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
    const double seg = cumulative_[i] - cumulative_[i - 1];
    const double f = seg > 0.0 ? (s - cumulative_[i - 1]) / seg : 0.0;
    return points_[i - 1] + f * (points_[i] - points_[i - 1]);
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double f = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  f = std::clamp(f, 0.0, 1.0);
  return distance(p, a + f * ab);
}

/// Simple polygon; vertices in order, closed implicitly.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw InvalidInput("a polygon needs at least three vertices");
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }

  bool contains(Vec2 p) const {
    bool inside = false;
    for (std::size_t i = 0, j = vertices_.size() - 1; i < vertices_.size(); j = i++) {
      const Vec2 a = vertices_[i], b = vertices_[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
        inside = !inside;
      }
    }
    return inside;
  }

  /// Zero inside, Euclidean distance to the boundary outside.
  double distance_to(Vec2 p) const {
    if (contains(p)) return 0.0;
    double best = INFINITY;
    for (std::size_t i = 0, j = vertices_.size() - 1; i < vertices_.size(); j = i++) {
      best = std::min(best, point_segment_distance(p, vertices_[j], vertices_[i]));
    }
    return best;
  }

  bool intersects_disc(Vec2 center, double radius) const { return distance_to(center) < radius; }

  static Polygon square(double half) {
    return Polygon({{-half, -half}, {half, -half}, {half, half}, {-half, half}});
  }

  static Polygon regular(Vec2 center, double radius, int sides) {
    std::vector<Vec2> v;
    for (int k = 0; k < sides; ++k) {
      const double a = 2.0 * std::numbers::pi * k / sides;
      v.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
    }
    return Polygon(std::move(v));
  }

 private:
  std::vector<Vec2> vertices_;
};

/// One drivable route through the scenario: an entry lane, the conflict
/// zone, and an exit lane.
struct Route {
  int entry_lane = 0;  // agents sharing it queue behind each other before the zone
  int exit_lane = 0;   // agents sharing it follow each other after the zone
  Polyline path;
  double zone_in = 0.0;   // arc position where a vehicle disc first touches the zone
  double zone_out = 0.0;  // arc position where it has fully left
};

/// Locates the arc interval over which a disc of `radius` centered on the
/// path overlaps `zone`.
inline void locate_zone(Route& route, const Polygon& zone, double radius) {
  constexpr double kStep = 0.5;
  const double len = route.path.length();
  auto touches = [&](double s) { return zone.intersects_disc(route.path.point_at(s), radius); };
  double first = -1.0, last = -1.0;
  for (double s = 0.0; s <= len; s += kStep) {
    if (touches(s)) {
      if (first < 0.0) first = s;
      last = s;
    }
  }
  if (first < 0.0) throw InvalidInput("route never reaches the conflict zone");
  // Refine both boundaries by bisection.
  auto refine = [&](double outside, double inside) {
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (outside + inside);
      (touches(mid) ? inside : outside) = mid;
    }
    return outside;
  };
  route.zone_in = first > 0.0 ? refine(std::max(0.0, first - kStep), first) : 0.0;
  route.zone_out = last < len ? refine(std::min(len, last + kStep), last) : len;
}

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace gameplan::sim
