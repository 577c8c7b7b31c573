#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/geometry.hpp"
#include "sgae/relations.hpp"

namespace sgae {

/// Context points (floor and other unsegmented structure) carry this
/// instance id; real objects use ids >= 1.
inline constexpr int kContextInstance = 0;

struct SceneObject {
  int instance_id = 0;
  int class_id = -1;      // -1 when the scene carries no labels
  int shape_family = 0;   // primitive archetype, used by the same_as rule
  OrientedBox box;
};

/// Ground-truth semantic graph over the objects of one scene. Nodes are
/// object indices (not instance ids); edges are directed and may carry
/// several predicates. Only pairs with at least one predicate are stored.
struct GroundTruthGraph {
  struct Edge {
    int src = 0;
    int dst = 0;
    std::vector<int> predicates;  // sorted ascending
  };
  std::vector<Edge> edges;
};

/// Instance-segmented point cloud with per-object boxes and (optionally)
/// class and relationship labels.
struct Scene {
  int num_classes = 0;
  int num_predicates = 0;
  std::vector<SceneObject> objects;
  std::vector<Vec3> points;
  std::vector<int> point_instance;  // parallel to points
  bool has_labels = false;
  GroundTruthGraph graph;

  int object_index(int instance_id) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (objects[i].instance_id == instance_id) return static_cast<int>(i);
    return -1;
  }
};

/// Point cloud for an ordered object pair. The mask channel marks points
/// of the first instance with 1, the second with 2, and everything else
/// inside the pair's union box with 0.
struct PairPointSet {
  std::vector<Vec3> points;
  std::vector<int> mask;
};

inline void require_instance(const Scene& scene, int instance_id,
                             const char* op) {
  if (scene.object_index(instance_id) < 0)
    throw DataError(std::string(op) + ": unknown instance id " +
                    std::to_string(instance_id));
}

/// All points belonging to one instance, in scene order.
inline std::vector<Vec3> extract_instance_points(const Scene& scene,
                                                 int instance_id) {
  require_instance(scene, instance_id, "extract_instance_points");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < scene.points.size(); ++i)
    if (scene.point_instance[i] == instance_id)
      out.push_back(scene.points[i]);
  return out;
}

/// All scene points inside the union box of the two instances' boxes,
/// with the 0/1/2 membership mask.
inline PairPointSet extract_pair_points(const Scene& scene, int instance_a,
                                        int instance_b) {
  require_instance(scene, instance_a, "extract_pair_points");
  require_instance(scene, instance_b, "extract_pair_points");
  if (instance_a == instance_b)
    throw ContractError("extract_pair_points: identical instances");
  const OrientedBox& box_a =
      scene.objects[scene.object_index(instance_a)].box;
  const OrientedBox& box_b =
      scene.objects[scene.object_index(instance_b)].box;
  const Aabb region = union_box(box_a, box_b).world_aabb();

  PairPointSet out;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const int inst = scene.point_instance[i];
    if (inst == instance_a || inst == instance_b ||
        region.contains(scene.points[i], 1e-9)) {
      out.points.push_back(scene.points[i]);
      out.mask.push_back(inst == instance_a ? 1 : inst == instance_b ? 2 : 0);
    }
  }
  return out;
}

/// Structural validation shared by the reader and the generator.
inline void validate_scene(const Scene& scene) {
  if (scene.num_classes < 1 || scene.num_predicates < 1)
    throw DataError("scene: vocabulary sizes must be positive");
  if (scene.objects.empty()) throw DataError("scene: no objects");
  if (scene.points.size() != scene.point_instance.size())
    throw DataError("scene: point/instance arrays differ in length");

  std::set<int> ids;
  for (const auto& o : scene.objects) {
    if (o.instance_id < 1)
      throw DataError("scene: object instance ids must be >= 1");
    if (!ids.insert(o.instance_id).second)
      throw DataError("scene: duplicate instance id " +
                      std::to_string(o.instance_id));
    if (scene.has_labels) {
      if (o.class_id < 0 || o.class_id >= scene.num_classes)
        throw DataError("scene: class id out of range");
    } else if (o.class_id != -1) {
      throw DataError("scene: unlabeled scene carries class ids");
    }
    if (o.box.extents.x <= 0.0 || o.box.extents.y <= 0.0 ||
        o.box.extents.z <= 0.0)
      throw DataError("scene: non-positive box extents");
  }

  std::set<int> with_points;
  for (int inst : scene.point_instance) {
    if (inst != kContextInstance && !ids.count(inst))
      throw DataError("scene: point references unknown instance " +
                      std::to_string(inst));
    with_points.insert(inst);
  }
  for (const auto& o : scene.objects)
    if (!with_points.count(o.instance_id))
      throw DataError("scene: instance " + std::to_string(o.instance_id) +
                      " has no points");

  if (!scene.has_labels && !scene.graph.edges.empty())
    throw DataError("scene: unlabeled scene carries graph edges");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : scene.graph.edges) {
    const int n = static_cast<int>(scene.objects.size());
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw DataError("scene: edge endpoint out of range");
    if (e.src == e.dst) throw DataError("scene: self-loop edge");
    if (!seen.insert({e.src, e.dst}).second)
      throw DataError("scene: duplicate edge");
    if (e.predicates.empty())
      throw DataError("scene: edge without predicates");
    for (int p : e.predicates)
      if (p < 0 || p >= scene.num_predicates)
        throw DataError("scene: predicate id out of range");
    if (!std::is_sorted(e.predicates.begin(), e.predicates.end()))
      throw DataError("scene: edge predicates must be sorted");
  }
}

/// Recomputes every edge label from stored boxes and shape families.
/// Generator output satisfies graph == derive_graph(scene) exactly.
inline GroundTruthGraph derive_graph(const Scene& scene,
                                     const RuleThresholds& t = {}) {
  GroundTruthGraph g;
  const int n = static_cast<int>(scene.objects.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = scene.objects[i];
      const auto& b = scene.objects[j];
      auto preds =
          relation_rules(a.box, b.box, a.shape_family == b.shape_family, t);
      if (!preds.empty()) g.edges.push_back({i, j, std::move(preds)});
    }
  return g;
}

}  // namespace sgae
