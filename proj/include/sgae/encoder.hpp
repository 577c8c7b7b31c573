#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/geometry.hpp"
#include "sgae/nn.hpp"
#include "sgae/rng.hpp"
#include "sgae/scene.hpp"
#include "sgae/tensor.hpp"

namespace sgae {

struct ModelConfig {
  int num_classes = 12;
  int num_predicates = 11;
  int feature_dim = 256;     // node/edge feature width d
  int box_feature_dim = 64;  // width of the linear box encoding
  int encoder_layers = 4;    // message-passing rounds in the encoder
  int decoder_layers = 3;    // message-passing rounds in the decoder
  int angle_bins = 24;       // yaw discretization for the box head
  int shape_code_dim = 1024;
  int codec_points = 256;         // points produced by the frozen codec
  std::uint64_t codec_seed = 7701;
  bool no_gcn = false;   // ablation: skip all message passing
  bool no_skip = false;  // ablation: decoder sees distributions only

  void validate() const {
    if (num_classes < 2 || num_predicates < 1)
      throw ConfigError("model: vocabulary sizes too small");
    if (feature_dim < 8 || feature_dim % 4 != 0)
      throw ConfigError("model: feature_dim must be a multiple of 4 and >= 8");
    if (box_feature_dim < 1) throw ConfigError("model: bad box_feature_dim");
    if (encoder_layers < 1 || decoder_layers < 1)
      throw ConfigError("model: layer counts must be positive");
    if (angle_bins < 2) throw ConfigError("model: need at least 2 angle bins");
    if (shape_code_dim < 4) throw ConfigError("model: bad shape_code_dim");
    if (codec_points < 8) throw ConfigError("model: bad codec_points");
  }
};

/// Point budgets applied before the networks see a scene.
struct PreprocessConfig {
  int fps_object_points = 256;
  int fps_pair_points = 384;
  static constexpr int kMaxPoints = 1000;

  void validate() const {
    if (fps_object_points < 4 || fps_object_points > kMaxPoints ||
        fps_pair_points < 4 || fps_pair_points > kMaxPoints)
      throw ConfigError("preprocess: point budgets must lie in [4, 1000]");
  }
};

/// One scene, converted to the stacked tensors the model consumes.
/// All point sets are center-normalized and downsampled by farthest point
/// sampling; the edge list covers every ordered object pair. Everything
/// here is a pure function of the scene, so instances are cached per
/// dataset and shared across epochs.
struct SceneInputs {
  int num_objects = 0;
  int num_edges = 0;

  TensorPtr object_points;                  // [sum p_i, 3]
  std::vector<std::size_t> object_offsets;  // N+1
  TensorPtr pair_points;                    // [sum q_e, 4], mask channel last
  std::vector<std::size_t> pair_offsets;    // E+1
  TensorPtr box_params;                     // [N, 7]
  std::vector<std::size_t> edge_src, edge_dst;

  TensorPtr box_target;                   // [N, 6] (w, l, h, cx, cy, cz)
  std::vector<std::size_t> angle_target;  // [N] yaw bins
  TensorPtr shape_target;                 // [N, shape_code_dim]

  bool has_labels = false;
  std::vector<std::size_t> node_class;  // [N]
  TensorPtr edge_target;                // [E, num_predicates] multi-hot
};

/// Graph bottleneck: per-node class distributions, per-edge predicate
/// probabilities, and the pre-head features used as decoder skip input.
struct BottleneckOutput {
  TensorPtr node_probs;  // [N, C_obj], rows sum to 1
  TensorPtr edge_probs;  // [E, C_pred], independent sigmoids
  TensorPtr node_state;  // [N, d]
  TensorPtr edge_state;  // [E, d]
};

/// Shared per-point feature stack (linear + ReLU each level) followed by
/// a max pool over each segment. No normalization inside: the pooled
/// feature must be bit-exact under point permutation and duplication.
struct PointNet {
  LinearLayer l0, l1, l2;
};

inline PointNet make_pointnet(ParameterStore& store, const std::string& name,
                              std::size_t in_ch, std::size_t d, Rng& rng) {
  PointNet net;
  net.l0 = make_linear(store, name + ".l0", in_ch, d / 4, rng);
  net.l1 = make_linear(store, name + ".l1", d / 4, d / 2, rng);
  net.l2 = make_linear(store, name + ".l2", d / 2, d, rng);
  return net;
}

inline TensorPtr pointnet_forward(const TensorPtr& points,
                                  const std::vector<std::size_t>& offsets,
                                  const PointNet& net) {
  auto h = relu(linear_forward(points, net.l0));
  h = relu(linear_forward(h, net.l1));
  h = relu(linear_forward(h, net.l2));
  return segment_max_pool(h, offsets);
}

/// One triplet message-passing round. g1 maps each (subject, edge, object)
/// feature triple through a shared linear + ReLU and splits the result
/// into a subject message, the new edge feature, and an object message;
/// node features take the mean of their incident messages through g2 as a
/// residual update. Nodes without incident edges pass through unchanged.
struct TripletGcnLayer {
  LinearLayer g1;        // 3d -> 3d
  LinearLayer g2a, g2b;  // d -> d each
};

inline TripletGcnLayer make_gcn_layer(ParameterStore& store,
                                      const std::string& name, std::size_t d,
                                      Rng& rng) {
  TripletGcnLayer l;
  l.g1 = make_linear(store, name + ".g1", 3 * d, 3 * d, rng);
  l.g2a = make_linear(store, name + ".g2a", d, d, rng);
  l.g2b = make_linear(store, name + ".g2b", d, d, rng);
  return l;
}

struct GcnState {
  TensorPtr nodes;  // [N, d]
  TensorPtr edges;  // [E, d]
};

inline GcnState gcn_layer(const TripletGcnLayer& layer, const GcnState& in,
                          const std::vector<std::size_t>& src,
                          const std::vector<std::size_t>& dst) {
  const std::size_t d = in.nodes->cols();
  const std::size_t n = in.nodes->rows();
  auto subj = gather_rows(in.nodes, src);
  auto obj = gather_rows(in.nodes, dst);
  auto h = relu(linear_forward(concat_cols({subj, in.edges, obj}), layer.g1));
  auto psi_subj = slice_cols(h, 0, d);
  auto new_edges = slice_cols(h, d, d);
  auto psi_obj = slice_cols(h, 2 * d, d);

  auto pooled = mean_incident(psi_subj, psi_obj, src, dst, n);
  auto update = linear_forward(relu(linear_forward(pooled, layer.g2a)),
                               layer.g2b);
  std::vector<double> incident(n, 0.0);
  for (std::size_t e : src) incident[e] = 1.0;
  for (std::size_t e : dst) incident[e] = 1.0;
  update = scale_rows(update, incident);
  return {add(in.nodes, update), new_edges};
}

/// Compresses a preprocessed scene into the graph bottleneck.
class SceneEncoder {
 public:
  SceneEncoder(ParameterStore& store, const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    object_net_ = make_pointnet(store, "enc.obj_net", 3, d, rng);
    pair_net_ = make_pointnet(store, "enc.pair_net", 4, d, rng);
    box_embed_ = make_linear(store, "enc.box_embed", 7,
                             static_cast<std::size_t>(cfg.box_feature_dim),
                             rng);
    fuse_ = make_linear(store, "enc.fuse",
                        d + static_cast<std::size_t>(cfg.box_feature_dim), d,
                        rng);
    for (int l = 0; l < cfg.encoder_layers; ++l)
      gcn_.push_back(
          make_gcn_layer(store, "enc.gcn" + std::to_string(l), d, rng));
    node_head_ = make_mlp(store, "enc.node_head",
                          {d, d, static_cast<std::size_t>(cfg.num_classes)},
                          true, rng);
    edge_head_ =
        make_mlp(store, "enc.edge_head",
                 {d, d, static_cast<std::size_t>(cfg.num_predicates)}, true,
                 rng);
  }

  BottleneckOutput encode(const SceneInputs& scene, bool training) const {
    if (scene.num_objects < 2)
      throw ContractError("encode: need at least two objects");

    auto point_feat =
        pointnet_forward(scene.object_points, scene.object_offsets,
                         object_net_);
    auto box_feat = linear_forward(scene.box_params, box_embed_);
    auto nodes = linear_forward(concat_cols({point_feat, box_feat}), fuse_);
    auto edges =
        pointnet_forward(scene.pair_points, scene.pair_offsets, pair_net_);

    GcnState state{nodes, edges};
    if (!cfg_.no_gcn) {
      for (const auto& layer : gcn_)
        state = gcn_layer(layer, state, scene.edge_src, scene.edge_dst);
    }

    BottleneckOutput out;
    out.node_state = state.nodes;
    out.edge_state = state.edges;
    out.node_probs =
        softmax_rows(mlp_forward(state.nodes, node_head_, training));
    out.edge_probs = sigmoid(mlp_forward(state.edges, edge_head_, training));
    return out;
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  PointNet object_net_, pair_net_;
  LinearLayer box_embed_, fuse_;
  std::vector<TripletGcnLayer> gcn_;
  Mlp node_head_, edge_head_;
};

/// Yaw bin index for the discretized angle head.
inline std::size_t yaw_bin(double yaw, int bins) {
  const double tau = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(yaw, tau);
  if (wrapped < 0.0) wrapped += tau;
  auto bin = static_cast<long>(wrapped / (tau / bins));
  if (bin >= bins) bin = bins - 1;
  return static_cast<std::size_t>(bin);
}

/// Midpoint angle of a yaw bin.
inline double yaw_bin_midpoint(std::size_t bin, int bins) {
  const double width = 2.0 * std::numbers::pi / bins;
  return (static_cast<double>(bin) + 0.5) * width;
}

}  // namespace sgae
