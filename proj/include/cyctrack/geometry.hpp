#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cyctrack/error.hpp"

namespace cyctrack {

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, kTwoPi);
  if (r <= -std::numbers::pi) {
    r += kTwoPi;
  } else if (r > std::numbers::pi) {
    r -= kTwoPi;
  }
  return r;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Oriented 3D box. The footprint lies in the BEV (x, y) plane, `length` runs
/// along the heading `yaw`.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;

  Box3D() = default;

  Box3D(double cx_, double cy_, double cz_, double length_, double width_,
        double height_, double yaw_)
      : cx(cx_), cy(cy_), cz(cz_), length(length_), width(width_),
        height(height_), yaw(normalize_angle(yaw_)) {
    if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0)) {
      throw ContractViolation("Box3D dimensions must be positive");
    }
  }

  double footprint_area() const { return length * width; }

  /// Footprint corners in counter-clockwise order.
  std::array<Point2, 4> corners() const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double hl = 0.5 * length;
    const double hw = 0.5 * width;
    const std::array<std::array<double, 2>, 4> local{
        {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Point2, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
      out[i] = {cx + c * local[i][0] - s * local[i][1],
                cy + s * local[i][0] + c * local[i][1]};
    }
    return out;
  }

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

namespace detail {

inline constexpr double kGeomEps = 1e-9;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline Point2 line_intersection(const Point2& p, const Point2& q,
                                const Point2& a, const Point2& b) {
  // Intersection of segment pq with the infinite line through ab.
  const double d1 = cross(a, b, p);
  const double d2 = cross(a, b, q);
  const double t = d1 / (d1 - d2);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace detail

/// Shoelace area of a simple polygon; positive for counter-clockwise order.
inline double polygon_area(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

/// Sutherland-Hodgman clipping of `subject` by the convex counter-clockwise
/// polygon `clip`.
inline std::vector<Point2> clip_convex(std::span<const Point2> subject,
                                       std::span<const Point2> clip) {
  std::vector<Point2> output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % m];
    std::vector<Point2> input;
    input.swap(output);
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& cur = input[i];
      const Point2& prev = input[(i + n - 1) % n];
      const bool cur_in = detail::cross(a, b, cur) >= -detail::kGeomEps;
      const bool prev_in = detail::cross(a, b, prev) >= -detail::kGeomEps;
      if (cur_in) {
        if (!prev_in) output.push_back(detail::line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(detail::line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

/// Intersection-over-union of the two boxes' BEV footprints. Height overlap
/// is ignored.
inline double bev_iou(const Box3D& a, const Box3D& b) {
  const auto pa = a.corners();
  const auto pb = b.corners();
  const std::vector<Point2> inter = clip_convex(pa, pb);
  const double inter_area = std::max(0.0, polygon_area(inter));
  const double uni = a.footprint_area() + b.footprint_area() - inter_area;
  if (!(uni > 1e-12)) return 0.0;
  return std::clamp(inter_area / uni, 0.0, 1.0);
}

/// Enlarges the BEV footprint by (1 + r). Center, yaw and height are kept.
inline Box3D buffer_box(const Box3D& b, double r) {
  if (r < 0.0) throw ContractViolation("buffer ratio must be non-negative");
  Box3D out = b;
  out.length *= 1.0 + r;
  out.width *= 1.0 + r;
  return out;
}

inline double buffered_iou(const Box3D& a, const Box3D& b, double ra, double rb) {
  return bev_iou(buffer_box(a, ra), buffer_box(b, rb));
}

/// Buffer ratio per scale level, index 0 being the smallest objects.
class BufferRatioTable {
 public:
  BufferRatioTable() : ratios_{0.50, 0.40, 0.30, 0.20, 0.10} {}

  explicit BufferRatioTable(std::vector<double> ratios) : ratios_(std::move(ratios)) {
    if (ratios_.empty()) throw ContractViolation("buffer ratio table is empty");
    for (std::size_t i = 0; i < ratios_.size(); ++i) {
      if (!(ratios_[i] >= 0.0)) {
        throw ContractViolation("buffer ratios must be non-negative");
      }
      if (i > 0 && ratios_[i] > ratios_[i - 1]) {
        throw ContractViolation(
            "buffer ratios must be non-increasing from small to large levels");
      }
    }
  }

  static BufferRatioTable zeros(std::size_t levels) {
    return BufferRatioTable(std::vector<double>(levels, 0.0));
  }

  /// Levels beyond the table reuse the last entry.
  double at(int level) const {
    if (level < 0) return ratios_.front();
    const auto idx = static_cast<std::size_t>(level);
    return idx < ratios_.size() ? ratios_[idx] : ratios_.back();
  }

  std::size_t size() const { return ratios_.size(); }
  const std::vector<double>& ratios() const { return ratios_; }

 private:
  std::vector<double> ratios_;
};

/// Scale level from BEV footprint area against ascending breakpoints (m^2).
/// With breakpoints {1, 4, 12, 30}: area < 1 -> 0, < 4 -> 1, ..., else 4.
inline int scale_level_from_area(double area, std::span<const double> breakpoints) {
  int level = 0;
  for (double bp : breakpoints) {
    if (area < bp) return level;
    ++level;
  }
  return level;
}

inline const std::vector<double>& default_area_breakpoints() {
  static const std::vector<double> kBreakpoints{1.0, 4.0, 12.0, 30.0};
  return kBreakpoints;
}

}  // namespace cyctrack
