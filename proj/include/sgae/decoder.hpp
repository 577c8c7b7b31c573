#pragma once

#include <string>
#include <vector>

#include "sgae/codec.hpp"
#include "sgae/encoder.hpp"
#include "sgae/error.hpp"
#include "sgae/geometry.hpp"
#include "sgae/nn.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

/// Decoder-side predictions for one scene, still on the autodiff tape.
struct DecoderOutput {
  TensorPtr box_params;    // [N, 6]: positive extents then centers
  TensorPtr angle_logits;  // [N, angle_bins]
  TensorPtr shape_codes;   // [N, shape_code_dim]
};

/// Embedded bottleneck features the decoder GCN starts from.
struct DecoderInput {
  TensorPtr nodes;  // [N, d]
  TensorPtr edges;  // [E, d]
};

/// Reconstructs per-object boxes and shape codes from the bottleneck.
///
/// Node input is the class distribution, concatenated with the encoder's
/// final node features unless the skip connection is ablated (edges
/// likewise), lifted to the working width by a linear + ReLU embedding.
/// A triplet GCN stack then refines the graph before the box head (three
/// extent log-scales, three centers, angle-bin logits) and the shape head
/// predict per-object outputs.
class SceneDecoder {
 public:
  SceneDecoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    const std::size_t skip = cfg.no_skip ? 0 : d;
    node_embed_ = make_linear(store, "dec.node_embed",
                              static_cast<std::size_t>(cfg.num_classes) + skip,
                              d, rng);
    edge_embed_ = make_linear(
        store, "dec.edge_embed",
        static_cast<std::size_t>(cfg.num_predicates) + skip, d, rng);
    for (int l = 0; l < cfg.decoder_layers; ++l)
      gcn_.push_back(
          make_gcn_layer(store, "dec.gcn" + std::to_string(l), d, rng));
    box_head_ = make_mlp(
        store, "dec.box_head",
        {d, d, d, 6 + static_cast<std::size_t>(cfg.angle_bins)}, true, rng);
    shape_head_ = make_mlp(
        store, "dec.shape_head",
        {d, d, d, static_cast<std::size_t>(cfg.shape_code_dim)}, true, rng);
  }

  DecoderInput build_input(const BottleneckOutput& bottleneck) const {
    TensorPtr node_in = bottleneck.node_probs;
    TensorPtr edge_in = bottleneck.edge_probs;
    if (!cfg_.no_skip) {
      node_in = concat_cols({node_in, bottleneck.node_state});
      edge_in = concat_cols({edge_in, bottleneck.edge_state});
    }
    return {relu(linear_forward(node_in, node_embed_)),
            relu(linear_forward(edge_in, edge_embed_))};
  }

  DecoderOutput decode(const BottleneckOutput& bottleneck,
                       const SceneInputs& scene, bool training) const {
    DecoderInput in = build_input(bottleneck);
    GcnState state{in.nodes, in.edges};
    if (!cfg_.no_gcn) {
      for (const auto& layer : gcn_)
        state = gcn_layer(layer, state, scene.edge_src, scene.edge_dst);
    }
    auto box_raw = mlp_forward(state.nodes, box_head_, training);
    DecoderOutput out;
    out.box_params = concat_cols(
        {exp_elem(slice_cols(box_raw, 0, 3)), slice_cols(box_raw, 3, 3)});
    out.angle_logits =
        slice_cols(box_raw, 6, static_cast<std::size_t>(cfg_.angle_bins));
    out.shape_codes = mlp_forward(state.nodes, shape_head_, training);
    return out;
  }

  std::size_t node_embed_width() const { return node_embed_.in_dim(); }
  std::size_t edge_embed_width() const { return edge_embed_.in_dim(); }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  LinearLayer node_embed_, edge_embed_;
  std::vector<TripletGcnLayer> gcn_;
  Mlp box_head_, shape_head_;
};

/// Plain (off-tape) per-object box prediction.
struct BoxPrediction {
  Vec3 extents;
  Vec3 center;
  std::vector<double> angle_logits;

  /// Concrete box using the most likely yaw bin's midpoint.
  OrientedBox to_box(int bins) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < angle_logits.size(); ++k)
      if (angle_logits[k] > angle_logits[best]) best = k;
    OrientedBox b;
    b.extents = extents;
    b.center = center;
    b.yaw = yaw_bin_midpoint(best, bins);
    return b;
  }
};

inline std::vector<BoxPrediction> extract_box_predictions(
    const DecoderOutput& out) {
  std::vector<BoxPrediction> preds;
  const std::size_t n = out.box_params->rows();
  const std::size_t bins = out.angle_logits->cols();
  preds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BoxPrediction p;
    p.extents = {out.box_params->at(i, 0), out.box_params->at(i, 1),
                 out.box_params->at(i, 2)};
    p.center = {out.box_params->at(i, 3), out.box_params->at(i, 4),
                out.box_params->at(i, 5)};
    for (std::size_t k = 0; k < bins; ++k)
      p.angle_logits.push_back(out.angle_logits->at(i, k));
    preds.push_back(std::move(p));
  }
  return preds;
}

struct ReconstructedObject {
  OrientedBox box;
  std::vector<double> shape_code;
  std::vector<Vec3> points;  // world frame
};

struct ReconstructedScene {
  std::vector<ReconstructedObject> objects;
};

/// Places decoded canonical shapes into the predicted boxes: scale by the
/// extents, rotate by the chosen yaw bin's midpoint, translate to the
/// center. Because decoded canonical points span exactly the unit cube,
/// each object's oriented bounding box equals its predicted box.
inline ReconstructedScene assemble_scene(
    const std::vector<BoxPrediction>& boxes,
    const std::vector<std::vector<double>>& codes,
    const FrozenShapeCodec& codec, int angle_bins) {
  if (boxes.size() != codes.size())
    throw ContractError("assemble_scene: box/code count mismatch");
  ReconstructedScene scene;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    ReconstructedObject obj;
    obj.box = boxes[i].to_box(angle_bins);
    if (obj.box.extents.x <= 0.0 || obj.box.extents.y <= 0.0 ||
        obj.box.extents.z <= 0.0)
      throw ContractError("assemble_scene: non-positive extents");
    obj.shape_code = codes[i];
    for (const auto& pc : codec.decode(codes[i])) {
      const Vec3 scaled{pc.x * obj.box.extents.x, pc.y * obj.box.extents.y,
                        pc.z * obj.box.extents.z};
      obj.points.push_back(obj.box.center + rotate_z(scaled, obj.box.yaw));
    }
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

}  // namespace sgae
