#pragma once

#include <vector>

#include "sgae/codec.hpp"
#include "sgae/encoder.hpp"
#include "sgae/geometry.hpp"
#include "sgae/scene.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

/// Converts a scene into model-ready tensors: per-object FPS-downsampled
/// centered point sets, per-pair masked point sets for every ordered object
/// pair, observed box rows fitted to the instance points, and the
/// pre-training targets (annotated box parameters, yaw bin, frozen codec
/// code). Deterministic; no randomness involved.
inline SceneInputs preprocess_scene(const Scene& scene,
                                    const PreprocessConfig& pre,
                                    const ModelConfig& model,
                                    const FrozenShapeCodec& codec) {
  pre.validate();
  if (scene.objects.size() < 2)
    throw DataError("preprocess_scene: need at least two objects");

  SceneInputs out;
  out.num_objects = static_cast<int>(scene.objects.size());
  const int n = out.num_objects;

  // Per-object point sets, FPS-reduced then centered. The observed box for
  // each object is fitted to the full instance point set; the annotated box
  // is only used for targets below.
  std::vector<std::vector<Vec3>> object_pts(static_cast<std::size_t>(n));
  std::vector<OrientedBox> observed(static_cast<std::size_t>(n));
  std::vector<double> flat_obj;
  out.object_offsets.push_back(0);
  for (int i = 0; i < n; ++i) {
    const auto& obj = scene.objects[static_cast<std::size_t>(i)];
    auto pts = extract_instance_points(scene, obj.instance_id);
    observed[static_cast<std::size_t>(i)] = fit_points_box(pts);
    auto idx = farthest_point_sample(
        pts, static_cast<std::size_t>(pre.fps_object_points));
    std::vector<Vec3> sampled;
    sampled.reserve(idx.size());
    for (auto k : idx) sampled.push_back(pts[k]);
    object_pts[static_cast<std::size_t>(i)] = sampled;  // world frame copy
    normalize_centers(sampled);
    for (const auto& p : sampled) {
      flat_obj.push_back(p.x);
      flat_obj.push_back(p.y);
      flat_obj.push_back(p.z);
    }
    out.object_offsets.push_back(out.object_offsets.back() + idx.size());
  }
  out.object_points =
      Tensor::row_major(out.object_offsets.back(), 3, std::move(flat_obj));

  // Ordered pairs (lexicographic), each with a masked union point set.
  std::vector<double> flat_pair;
  out.pair_offsets.push_back(0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      out.edge_src.push_back(static_cast<std::size_t>(i));
      out.edge_dst.push_back(static_cast<std::size_t>(j));
      auto pair = extract_pair_points(
          scene, scene.objects[static_cast<std::size_t>(i)].instance_id,
          scene.objects[static_cast<std::size_t>(j)].instance_id);
      auto idx = farthest_point_sample(
          pair.points, static_cast<std::size_t>(pre.fps_pair_points));
      std::vector<Vec3> sampled;
      std::vector<int> mask;
      sampled.reserve(idx.size());
      for (auto k : idx) {
        sampled.push_back(pair.points[k]);
        mask.push_back(pair.mask[k]);
      }
      normalize_centers(sampled);
      for (std::size_t k = 0; k < sampled.size(); ++k) {
        flat_pair.push_back(sampled[k].x);
        flat_pair.push_back(sampled[k].y);
        flat_pair.push_back(sampled[k].z);
        flat_pair.push_back(static_cast<double>(mask[k]));
      }
      out.pair_offsets.push_back(out.pair_offsets.back() + idx.size());
    }
  out.num_edges = static_cast<int>(out.edge_src.size());
  out.pair_points =
      Tensor::row_major(out.pair_offsets.back(), 4, std::move(flat_pair));

  // Box rows (observed fit) and pre-training targets (annotated geometry).
  std::vector<double> box7, box6, codes;
  for (int i = 0; i < n; ++i) {
    const auto& obj = scene.objects[static_cast<std::size_t>(i)];
    const auto q = observed[static_cast<std::size_t>(i)].params();
    box7.insert(box7.end(), q.begin(), q.end());
    const auto p = obj.box.params();
    box6.insert(box6.end(), p.begin(), p.begin() + 6);
    out.angle_target.push_back(yaw_bin(obj.box.yaw, model.angle_bins));
    auto code = codec.encode(
        canonicalize_points(object_pts[static_cast<std::size_t>(i)], obj.box));
    codes.insert(codes.end(), code.begin(), code.end());
  }
  out.box_params =
      Tensor::row_major(static_cast<std::size_t>(n), 7, std::move(box7));
  out.box_target =
      Tensor::row_major(static_cast<std::size_t>(n), 6, std::move(box6));
  out.shape_target = Tensor::row_major(
      static_cast<std::size_t>(n),
      static_cast<std::size_t>(codec.code_dim()), std::move(codes));

  // Labels, when present.
  out.has_labels = scene.has_labels;
  if (scene.has_labels) {
    for (const auto& obj : scene.objects) {
      if (obj.class_id < 0 || obj.class_id >= model.num_classes)
        throw DataError("preprocess_scene: class id exceeds vocabulary");
      out.node_class.push_back(static_cast<std::size_t>(obj.class_id));
    }
    auto target = Tensor::zeros({static_cast<std::size_t>(out.num_edges),
                                 static_cast<std::size_t>(model.num_predicates)});
    for (const auto& e : scene.graph.edges) {
      // Ordered-pair index of (src, dst) in the lexicographic edge list.
      const std::size_t row =
          static_cast<std::size_t>(e.src) * (n - 1) +
          static_cast<std::size_t>(e.dst > e.src ? e.dst - 1 : e.dst);
      for (int p : e.predicates) {
        if (p >= model.num_predicates)
          throw DataError("preprocess_scene: predicate id exceeds vocabulary");
        target->at(row, static_cast<std::size_t>(p)) = 1.0;
      }
    }
    out.edge_target = target;
  }
  return out;
}

}  // namespace sgae
