#pragma once

#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/geometry.hpp"

namespace sgae {

/// Predicate vocabulary. Directional predicates describe the subject
/// relative to the object: an edge (a, b) labeled kLeft reads "a is left
/// of b". Derived from box geometry by relation_rules.
enum Predicate : int {
  kLeft = 0,
  kRight = 1,
  kFront = 2,
  kBehind = 3,
  kHigher = 4,
  kLower = 5,
  kBigger = 6,
  kSmaller = 7,
  kSameAs = 8,
  kCloseBy = 9,
  kStandingOn = 10,
};

inline constexpr int kNumRulePredicates = 11;

inline const char* predicate_name(int p) {
  switch (p) {
    case kLeft: return "left";
    case kRight: return "right";
    case kFront: return "front";
    case kBehind: return "behind";
    case kHigher: return "higher";
    case kLower: return "lower";
    case kBigger: return "bigger";
    case kSmaller: return "smaller";
    case kSameAs: return "same_as";
    case kCloseBy: return "close_by";
    case kStandingOn: return "standing_on";
  }
  throw ContractError("predicate_name: unknown predicate id");
}

struct RuleThresholds {
  double volume_ratio = 1.2;      // bigger/smaller
  double extent_ratio = 1.1;      // same_as per-axis extent similarity
  double close_factor = 1.5;      // close_by, in mean box diagonals
  double standing_gap = 0.05;     // max vertical gap for standing_on
  double standing_overlap = 0.5;  // min footprint overlap fraction
};

namespace detail {

/// Overlap area of two axis-aligned rectangles, as a fraction of the
/// first rectangle's area.
inline double footprint_overlap_fraction(const Aabb& a, const Aabb& b) {
  const double w = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
  const double l = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
  if (w <= 0.0 || l <= 0.0) return 0.0;
  const double area_a = (a.hi.x - a.lo.x) * (a.hi.y - a.lo.y);
  if (area_a <= 0.0) return 0.0;
  return (w * l) / area_a;
}

}  // namespace detail

/// Derives all predicates holding for the directed pair (a, b).
///
/// Axis predicates compare center separation against the mean of the two
/// world-AABB half-extents on that axis, so "a left of b" holds exactly
/// when "b right of a" holds under swapped arguments. bigger/smaller use
/// a strict volume ratio; same_as requires the caller-supplied shape
/// family match plus all extent ratios within `extent_ratio`; close_by
/// compares center distance to the mean box diagonal; standing_on needs
/// a strictly higher center, a small bottom-to-top gap, and sufficient
/// footprint overlap. The output is sorted by predicate id.
inline std::vector<int> relation_rules(const OrientedBox& a,
                                       const OrientedBox& b, bool same_family,
                                       const RuleThresholds& t = {}) {
  if (a.extents.x <= 0.0 || a.extents.y <= 0.0 || a.extents.z <= 0.0 ||
      b.extents.x <= 0.0 || b.extents.y <= 0.0 || b.extents.z <= 0.0)
    throw ContractError("relation_rules: non-positive box extents");

  std::vector<int> out;
  const Aabb wa = a.world_aabb();
  const Aabb wb = b.world_aabb();
  const Vec3 ha = wa.size() * 0.5;
  const Vec3 hb = wb.size() * 0.5;
  const Vec3 sep = b.center - a.center;

  const double tx = 0.5 * (ha.x + hb.x);
  if (sep.x > tx) out.push_back(kLeft);
  if (-sep.x > tx) out.push_back(kRight);

  const double ty = 0.5 * (ha.y + hb.y);
  if (sep.y > ty) out.push_back(kFront);
  if (-sep.y > ty) out.push_back(kBehind);

  const double tz = 0.5 * (ha.z + hb.z);
  if (-sep.z > tz) out.push_back(kHigher);
  if (sep.z > tz) out.push_back(kLower);

  if (a.volume() > t.volume_ratio * b.volume()) out.push_back(kBigger);
  if (b.volume() > t.volume_ratio * a.volume()) out.push_back(kSmaller);

  if (same_family) {
    const bool similar =
        std::max(a.extents.x, b.extents.x) <=
            t.extent_ratio * std::min(a.extents.x, b.extents.x) &&
        std::max(a.extents.y, b.extents.y) <=
            t.extent_ratio * std::min(a.extents.y, b.extents.y) &&
        std::max(a.extents.z, b.extents.z) <=
            t.extent_ratio * std::min(a.extents.z, b.extents.z);
    if (similar) out.push_back(kSameAs);
  }

  const double dist = (a.center - b.center).norm();
  if (dist < t.close_factor * 0.5 * (a.diagonal() + b.diagonal()))
    out.push_back(kCloseBy);

  if (a.center.z > b.center.z &&
      std::abs(a.bottom() - b.top()) <= t.standing_gap &&
      detail::footprint_overlap_fraction(wa, wb) >= t.standing_overlap)
    out.push_back(kStandingOn);

  return out;
}

}  // namespace sgae
