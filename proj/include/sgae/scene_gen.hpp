#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/geometry.hpp"
#include "sgae/relations.hpp"
#include "sgae/rng.hpp"
#include "sgae/scene.hpp"
#include "sgae/scene_io.hpp"

namespace sgae {

/// Shape families (primitive archetypes). same_as can only hold within a
/// family.
enum ShapeFamily : int {
  kFamilyBox = 0,
  kFamilyCylinder = 1,
  kFamilyLegged = 2,
  kFamilyPanel = 3,
  kFamilyPot = 4,
};

struct ClassSpec {
  const char* name;
  int family;
  double weight;  // sampling weight; the vocabulary is long-tailed
  Vec3 extent_lo, extent_hi;
  bool support;    // other objects may stand on top
  bool stackable;  // may be placed on a support
};

/// Fixed 12-class vocabulary. Weights fall off steeply so per-class
/// frequency tertiles (head/body/tail) are non-degenerate. Classes are
/// grouped into shared size bands on purpose: within a band the extent
/// ranges coincide and only the surface geometry (shape family) tells the
/// classes apart, so classification cannot be solved from bounding boxes
/// alone. Placement flags also match within each band to keep position
/// from leaking the class.
inline const std::array<ClassSpec, 12>& class_table() {
  static const std::array<ClassSpec, 12> table{{
      // Band: large furniture (support surfaces).
      {"table", kFamilyLegged, 18.0, {1.00, 0.70, 0.70}, {1.60, 1.00, 0.85}, true, false},
      {"cabinet", kFamilyBox, 16.0, {1.00, 0.70, 0.70}, {1.60, 1.00, 0.85}, true, false},
      // Band: seat-sized floor objects.
      {"chair", kFamilyLegged, 13.0, {0.42, 0.42, 0.55}, {0.60, 0.60, 0.95}, false, false},
      {"crate", kFamilyBox, 12.0, {0.42, 0.42, 0.55}, {0.60, 0.60, 0.95}, false, false},
      {"stool", kFamilyCylinder, 10.0, {0.42, 0.42, 0.55}, {0.60, 0.60, 0.95}, false, false},
      {"shelf", kFamilyPanel, 9.0, {0.90, 0.22, 1.20}, {1.40, 0.32, 1.70}, true, false},
      // Band: bin-sized floor objects.
      {"trashcan", kFamilyCylinder, 7.0, {0.30, 0.30, 0.50}, {0.42, 0.42, 0.70}, false, false},
      {"bin", kFamilyBox, 6.0, {0.30, 0.30, 0.50}, {0.42, 0.42, 0.70}, false, false},
      // Band: small objects that may stand on furniture.
      {"lamp", kFamilyCylinder, 5.0, {0.16, 0.16, 0.35}, {0.30, 0.30, 0.60}, false, true},
      {"plant", kFamilyPot, 4.0, {0.16, 0.16, 0.35}, {0.30, 0.30, 0.60}, false, true},
      {"monitor", kFamilyPanel, 3.0, {0.45, 0.06, 0.30}, {0.60, 0.10, 0.40}, false, true},
      {"vase", kFamilyCylinder, 2.0, {0.10, 0.10, 0.20}, {0.18, 0.18, 0.35}, false, true},
  }};
  return table;
}

inline constexpr int kGeneratorNumClasses = 12;

inline const char* class_name(int class_id) {
  if (class_id < 0 || class_id >= kGeneratorNumClasses)
    throw ContractError("class_name: class id out of range");
  return class_table()[static_cast<std::size_t>(class_id)].name;
}

struct GeneratorConfig {
  int min_objects = 4;
  int max_objects = 9;
  int points_per_object = 256;
  int floor_points = 96;
  double room_extent = 5.0;  // square room side length
  int max_retries = 200;
  double jitter_sigma = 0.002;  // surface noise, world units
  RuleThresholds thresholds;
};

namespace detail {

/// Canonical surface coordinates live in [-limit, limit]^3 so that after
/// scaling, jitter, and 9-digit quantization every point stays strictly
/// inside its box.
inline constexpr double kCanonicalLimit = 0.4995;

inline double clamp_canonical(double v) {
  return std::min(std::max(v, -kCanonicalLimit), kCanonicalLimit);
}

inline Vec3 sample_box_surface(Rng& rng, const Vec3& e) {
  const double axy = e.x * e.y, axz = e.x * e.z, ayz = e.y * e.z;
  const double total = 2.0 * (axy + axz + ayz);
  double pick = rng.uniform(0.0, total);
  const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
  if (pick < axy) return {u, v, 0.5};
  pick -= axy;
  if (pick < axy) return {u, v, -0.5};
  pick -= axy;
  if (pick < axz) return {u, 0.5, v};
  pick -= axz;
  if (pick < axz) return {u, -0.5, v};
  pick -= axz;
  if (pick < ayz) return {0.5, u, v};
  return {-0.5, u, v};
}

inline Vec3 sample_cylinder_surface(Rng& rng, const Vec3& e) {
  const double lateral = std::numbers::pi * 0.5 * (e.x + e.y) * e.z;
  const double caps = 2.0 * std::numbers::pi * 0.25 * e.x * e.y;
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  if (rng.uniform(0.0, lateral + caps) < lateral)
    return {0.5 * std::cos(theta), 0.5 * std::sin(theta),
            rng.uniform(-0.5, 0.5)};
  const double r = 0.5 * std::sqrt(rng.uniform());
  return {r * std::cos(theta), r * std::sin(theta),
          rng.uniform() < 0.5 ? 0.5 : -0.5};
}

inline Vec3 sample_legged_surface(Rng& rng, const Vec3& e) {
  (void)e;
  constexpr double slab = 0.12;  // top slab thickness, canonical
  constexpr double leg = 0.08;   // leg width, canonical
  if (rng.uniform() < 0.55) {
    // Slab: top face or its rim.
    if (rng.uniform() < 0.7)
      return {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.5};
    const double z = rng.uniform(0.5 - slab, 0.5);
    if (rng.uniform() < 0.5)
      return {rng.uniform(-0.5, 0.5), rng.uniform() < 0.5 ? -0.5 : 0.5, z};
    return {rng.uniform() < 0.5 ? -0.5 : 0.5, rng.uniform(-0.5, 0.5), z};
  }
  // One of four corner legs.
  const double sx = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double sy = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double cx = sx * (0.5 - 0.5 * leg);
  const double cy = sy * (0.5 - 0.5 * leg);
  const double z = rng.uniform(-0.5, 0.5 - slab);
  if (rng.uniform() < 0.5)
    return {cx + (rng.uniform() < 0.5 ? -0.5 : 0.5) * leg,
            cy + rng.uniform(-0.5, 0.5) * leg, z};
  return {cx + rng.uniform(-0.5, 0.5) * leg,
          cy + (rng.uniform() < 0.5 ? -0.5 : 0.5) * leg, z};
}

inline Vec3 sample_pot_surface(Rng& rng, const Vec3& e) {
  (void)e;
  if (rng.uniform() < 0.35) {
    // Pot: small cylinder in the lower part.
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return {0.35 * std::cos(theta), 0.35 * std::sin(theta),
            rng.uniform(-0.5, -0.1)};
  }
  // Foliage: noisy sphere shell around an upper center.
  Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
  const double len = dir.norm();
  if (len < 1e-9) return {0.0, 0.0, 0.1};
  dir = dir * (1.0 / len);
  const double radius = 0.38 * (0.75 + 0.25 * rng.uniform());
  return {dir.x * radius, dir.y * radius, 0.1 + dir.z * radius};
}

inline Vec3 sample_family_surface(Rng& rng, int family, const Vec3& e) {
  switch (family) {
    case kFamilyBox:
    case kFamilyPanel:
      return sample_box_surface(rng, e);
    case kFamilyCylinder:
      return sample_cylinder_surface(rng, e);
    case kFamilyLegged:
      return sample_legged_surface(rng, e);
    case kFamilyPot:
      return sample_pot_surface(rng, e);
  }
  throw ContractError("sample_family_surface: unknown family");
}

inline bool aabbs_collide(const Aabb& a, const Aabb& b) {
  return a.lo.x < b.hi.x - 1e-9 && b.lo.x < a.hi.x - 1e-9 &&
         a.lo.y < b.hi.y - 1e-9 && b.lo.y < a.hi.y - 1e-9 &&
         a.lo.z < b.hi.z - 1e-9 && b.lo.z < a.hi.z - 1e-9;
}

}  // namespace detail

/// Generates one fully labeled scene: weighted class draws, collision-free
/// placement (stackable classes prefer standing on a support's top face),
/// surface-sampled object points, floor context points, and edge labels
/// derived from the final quantized geometry via relation_rules. Throws
/// DataError when placement cannot be completed within the retry budget.
inline Scene generate_scene(const GeneratorConfig& cfg, Rng& rng) {
  if (cfg.min_objects < 2 || cfg.max_objects < cfg.min_objects)
    throw ConfigError("generate_scene: bad object count range");
  if (cfg.points_per_object < 8)
    throw ConfigError("generate_scene: need at least 8 points per object");

  const auto& table = class_table();
  double total_weight = 0.0;
  for (const auto& c : table) total_weight += c.weight;

  Scene scene;
  scene.num_classes = kGeneratorNumClasses;
  scene.num_predicates = kNumRulePredicates;
  scene.has_labels = true;

  const int count =
      cfg.min_objects +
      static_cast<int>(rng.below(
          static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1)));

  std::vector<int> classes;
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total_weight);
    int cls = 0;
    for (int c = 0; c < kGeneratorNumClasses; ++c) {
      if (pick < table[static_cast<std::size_t>(c)].weight) {
        cls = c;
        break;
      }
      pick -= table[static_cast<std::size_t>(c)].weight;
    }
    classes.push_back(cls);
  }
  // Non-stackables first so supports exist before stackables are placed.
  std::stable_sort(classes.begin(), classes.end(), [&](int a, int b) {
    return !table[static_cast<std::size_t>(a)].stackable &&
           table[static_cast<std::size_t>(b)].stackable;
  });

  const double half_room = 0.5 * cfg.room_extent;
  std::vector<Aabb> placed_aabbs;

  for (int idx = 0; idx < count; ++idx) {
    const auto& spec = table[static_cast<std::size_t>(classes[idx])];
    SceneObject obj;
    obj.instance_id = idx + 1;
    obj.class_id = classes[idx];
    obj.shape_family = spec.family;

    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      OrientedBox box;
      box.extents = {rng.uniform(spec.extent_lo.x, spec.extent_hi.x),
                     rng.uniform(spec.extent_lo.y, spec.extent_hi.y),
                     rng.uniform(spec.extent_lo.z, spec.extent_hi.z)};
      box.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);

      // Half-sizes of the yawed footprint.
      const double c = std::abs(std::cos(box.yaw));
      const double s = std::abs(std::sin(box.yaw));
      const double hx = 0.5 * (c * box.extents.x + s * box.extents.y);
      const double hy = 0.5 * (s * box.extents.x + c * box.extents.y);

      bool try_stack = spec.stackable && rng.uniform() < 0.7;
      if (try_stack) {
        std::vector<int> supports;
        for (int j = 0; j < idx; ++j)
          if (table[static_cast<std::size_t>(classes[j])].support)
            supports.push_back(j);
        if (supports.empty()) {
          try_stack = false;
        } else {
          const int sup_idx = supports[static_cast<std::size_t>(
              rng.below(supports.size()))];
          const Aabb& top = placed_aabbs[static_cast<std::size_t>(sup_idx)];
          const double margin = 0.01;
          const double lo_x = top.lo.x + hx + margin;
          const double hi_x = top.hi.x - hx - margin;
          const double lo_y = top.lo.y + hy + margin;
          const double hi_y = top.hi.y - hy - margin;
          if (lo_x >= hi_x || lo_y >= hi_y) {
            try_stack = false;  // support top too small, place on the floor
          } else {
            box.center = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y),
                          top.hi.z + 0.5 * box.extents.z};
          }
        }
      }
      if (!try_stack) {
        if (hx >= half_room || hy >= half_room) continue;
        box.center = {rng.uniform(-half_room + hx, half_room - hx),
                      rng.uniform(-half_room + hy, half_room - hy),
                      0.5 * box.extents.z};
      }

      const Aabb aabb = box.world_aabb();
      bool collides = false;
      for (const auto& other : placed_aabbs)
        if (detail::aabbs_collide(aabb, other)) {
          collides = true;
          break;
        }
      if (collides) continue;

      obj.box = box;
      placed_aabbs.push_back(aabb);
      placed = true;
    }
    if (!placed)
      throw DataError("generate_scene: placement failed after " +
                      std::to_string(cfg.max_retries) + " retries");
    scene.objects.push_back(obj);
  }

  // Surface points, sampled in the canonical frame and mapped out.
  for (const auto& obj : scene.objects) {
    const Vec3& e = obj.box.extents;
    for (int k = 0; k < cfg.points_per_object; ++k) {
      Vec3 pc = detail::sample_family_surface(rng, obj.shape_family, e);
      pc.x = detail::clamp_canonical(pc.x + cfg.jitter_sigma / e.x * rng.normal());
      pc.y = detail::clamp_canonical(pc.y + cfg.jitter_sigma / e.y * rng.normal());
      pc.z = detail::clamp_canonical(pc.z + cfg.jitter_sigma / e.z * rng.normal());
      const Vec3 world =
          obj.box.center +
          rotate_z({pc.x * e.x, pc.y * e.y, pc.z * e.z}, obj.box.yaw);
      scene.points.push_back(world);
      scene.point_instance.push_back(obj.instance_id);
    }
  }
  for (int k = 0; k < cfg.floor_points; ++k) {
    scene.points.push_back({rng.uniform(-half_room, half_room),
                            rng.uniform(-half_room, half_room), 0.0});
    scene.point_instance.push_back(kContextInstance);
  }

  // Quantize to the file format's precision, then derive labels from the
  // quantized geometry so stored labels replay exactly after round-trips.
  for (auto& obj : scene.objects) {
    obj.box.center = {quantize9(obj.box.center.x), quantize9(obj.box.center.y),
                      quantize9(obj.box.center.z)};
    obj.box.extents = {quantize9(obj.box.extents.x),
                       quantize9(obj.box.extents.y),
                       quantize9(obj.box.extents.z)};
    obj.box.yaw = quantize9(obj.box.yaw);
  }
  for (auto& p : scene.points)
    p = {quantize9(p.x), quantize9(p.y), quantize9(p.z)};

  scene.graph = derive_graph(scene, cfg.thresholds);
  validate_scene(scene);
  return scene;
}

}  // namespace sgae
