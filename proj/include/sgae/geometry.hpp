#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "sgae/error.hpp"

namespace sgae {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  double norm_sq() const { return dot(*this); }
};

inline Vec3 min_elem(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 max_elem(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

/// Rotates about the +z axis.
inline Vec3 rotate_z(const Vec3& p, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

struct Aabb {
  Vec3 lo, hi;

  Vec3 size() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * 0.5; }
  bool contains(const Vec3& p, double eps = 0.0) const {
    return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps &&
           p.y <= hi.y + eps && p.z >= lo.z - eps && p.z <= hi.z + eps;
  }
};

/// Upright box: full extents (width, length, height) around a center, with
/// a yaw rotation about the vertical axis. Parameter vector order is
/// (w, l, h, cx, cy, cz, yaw).
struct OrientedBox {
  Vec3 center;
  Vec3 extents;  // full sizes along the box's local x, y, z
  double yaw = 0.0;

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    std::size_t k = 0;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        for (int sz : {-1, 1}) {
          Vec3 local{0.5 * sx * extents.x, 0.5 * sy * extents.y,
                     0.5 * sz * extents.z};
          out[k++] = center + rotate_z(local, yaw);
        }
    return out;
  }

  Aabb world_aabb() const {
    auto cs = corners();
    Aabb box{cs[0], cs[0]};
    for (const auto& c : cs) {
      box.lo = min_elem(box.lo, c);
      box.hi = max_elem(box.hi, c);
    }
    return box;
  }

  double volume() const { return extents.x * extents.y * extents.z; }
  double diagonal() const { return extents.norm(); }
  double top() const { return center.z + 0.5 * extents.z; }
  double bottom() const { return center.z - 0.5 * extents.z; }

  bool contains(const Vec3& p, double eps = 1e-9) const {
    const Vec3 local = rotate_z(p - center, -yaw);
    return std::abs(local.x) <= 0.5 * extents.x + eps &&
           std::abs(local.y) <= 0.5 * extents.y + eps &&
           std::abs(local.z) <= 0.5 * extents.z + eps;
  }

  std::array<double, 7> params() const {
    return {extents.x, extents.y, extents.z, center.x,
            center.y,  center.z,  yaw};
  }

  static OrientedBox from_params(const std::array<double, 7>& p) {
    OrientedBox b;
    b.extents = {p[0], p[1], p[2]};
    b.center = {p[3], p[4], p[5]};
    b.yaw = p[6];
    return b;
  }
};

/// Smallest axis-aligned box covering both inputs.
inline OrientedBox union_box(const OrientedBox& a, const OrientedBox& b) {
  const Aabb wa = a.world_aabb();
  const Aabb wb = b.world_aabb();
  Aabb u{min_elem(wa.lo, wb.lo), max_elem(wa.hi, wb.hi)};
  OrientedBox out;
  out.center = u.center();
  out.extents = u.size();
  out.yaw = 0.0;
  return out;
}

/// Tightest axis-aligned box around a point set (yaw 0). This is the box an
/// instance mask yields at inference time: jitter widens it and object yaw
/// inflates it relative to the annotated oriented box.
inline OrientedBox fit_points_box(const std::vector<Vec3>& points) {
  if (points.empty()) throw ContractError("fit_points_box: empty point set");
  Aabb box{points[0], points[0]};
  for (const auto& p : points) {
    box.lo = min_elem(box.lo, p);
    box.hi = max_elem(box.hi, p);
  }
  OrientedBox out;
  out.center = box.center();
  out.extents = box.size();
  out.yaw = 0.0;
  return out;
}

/// Subtracts the centroid from every point; returns the centroid.
inline Vec3 normalize_centers(std::vector<Vec3>& points) {
  if (points.empty())
    throw ContractError("normalize_centers: empty point set");
  Vec3 c{0.0, 0.0, 0.0};
  for (const auto& p : points) c = c + p;
  c = c * (1.0 / static_cast<double>(points.size()));
  for (auto& p : points) p = p - c;
  return c;
}

/// Farthest point sampling.
///
/// Returns selected indices in selection order. The walk starts from the
/// lower-index endpoint of a pair attaining the maximal pairwise distance
/// (so two samples always realize the point-set diameter); each subsequent
/// pick maximizes the distance to the already-selected set. All ties break
/// toward the lower index. Asking for n >= size returns every index in
/// original order.
inline std::vector<std::size_t> farthest_point_sample(
    const std::vector<Vec3>& points, std::size_t n) {
  if (points.empty())
    throw ContractError("farthest_point_sample: empty point set");
  if (n == 0)
    throw ContractError("farthest_point_sample: zero samples requested");
  const std::size_t p = points.size();
  if (n >= p) {
    std::vector<std::size_t> all(p);
    for (std::size_t i = 0; i < p; ++i) all[i] = i;
    return all;
  }

  std::size_t seed = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      const double d = (points[i] - points[j]).norm_sq();
      if (d > best) {
        best = d;
        seed = i;
      }
    }

  std::vector<std::size_t> picked;
  picked.reserve(n);
  picked.push_back(seed);
  std::vector<double> min_dist(p);
  for (std::size_t i = 0; i < p; ++i)
    min_dist[i] = (points[i] - points[seed]).norm_sq();

  while (picked.size() < n) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    picked.push_back(next);
    for (std::size_t i = 0; i < p; ++i)
      min_dist[i] = std::min(min_dist[i], (points[i] - points[next]).norm_sq());
  }
  return picked;
}

}  // namespace sgae
