#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/geometry.hpp"
#include "sgae/rng.hpp"

namespace sgae {

/// Maps an object's points into its box's canonical frame: translate to
/// the center, undo the yaw, scale each axis into [-0.5, 0.5].
inline std::vector<Vec3> canonicalize_points(const std::vector<Vec3>& points,
                                             const OrientedBox& box) {
  if (box.extents.x <= 0.0 || box.extents.y <= 0.0 || box.extents.z <= 0.0)
    throw ContractError("canonicalize_points: non-positive extents");
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Vec3 local = rotate_z(p - box.center, -box.yaw);
    out.push_back({local.x / box.extents.x, local.y / box.extents.y,
                   local.z / box.extents.z});
  }
  return out;
}

/// Frozen point-cloud autoencoder standing in for an externally trained
/// shape codec. All weights are fixed functions of the seed; nothing here
/// participates in gradient computation. The encoder is a small PointNet
/// (per-point tanh layers + max pool + linear readout), so codes are
/// exactly invariant to point order and duplication. The decoder deforms
/// a seeded sphere grid conditioned on the code and rescales the result
/// so its bounding box is exactly the canonical unit cube.
class FrozenShapeCodec {
 public:
  FrozenShapeCodec(int code_dim, int num_points, std::uint64_t seed)
      : code_dim_(code_dim), num_points_(num_points) {
    if (code_dim < 4) throw ConfigError("shape codec: code_dim too small");
    if (num_points < 8) throw ConfigError("shape codec: too few points");
    Rng rng(seed);
    init_matrix(rng, w0_, kH0, 3);
    init_matrix(rng, b0_, kH0, 1);
    init_matrix(rng, w1_, kH1, kH0);
    init_matrix(rng, b1_, kH1, 1);
    init_matrix(rng, w2_, static_cast<std::size_t>(code_dim), kH1);
    init_matrix(rng, b2_, static_cast<std::size_t>(code_dim), 1);
    init_matrix(rng, dw0_, kDh, static_cast<std::size_t>(code_dim));
    init_matrix(rng, db0_, kDh, 1);
    init_matrix(rng, dw1_, 3 * (3 + kDh), 1);
    init_matrix(rng, db1_, 3, 1);

    // Fibonacci sphere of radius 0.5: a deterministic, well-spread base.
    base_.reserve(static_cast<std::size_t>(num_points));
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < num_points; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / num_points;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double theta = golden * i;
      base_.push_back(
          {0.5 * r * std::cos(theta), 0.5 * r * std::sin(theta), 0.5 * z});
    }
  }

  int code_dim() const { return code_dim_; }
  int num_points() const { return num_points_; }

  /// Canonical (unit-cube) points -> latent code.
  std::vector<double> encode(const std::vector<Vec3>& canonical) const {
    if (canonical.empty())
      throw ContractError("shape codec: empty point set");
    std::vector<double> pooled(kH1, -1e300);
    std::vector<double> h0(kH0), h1(kH1);
    for (const auto& p : canonical) {
      for (std::size_t i = 0; i < kH0; ++i)
        h0[i] = std::tanh(w0_[i * 3] * p.x + w0_[i * 3 + 1] * p.y +
                          w0_[i * 3 + 2] * p.z + b0_[i]);
      for (std::size_t i = 0; i < kH1; ++i) {
        double acc = b1_[i];
        for (std::size_t j = 0; j < kH0; ++j) acc += w1_[i * kH0 + j] * h0[j];
        h1[i] = std::tanh(acc);
        if (h1[i] > pooled[i]) pooled[i] = h1[i];
      }
    }
    std::vector<double> code(static_cast<std::size_t>(code_dim_));
    for (std::size_t i = 0; i < code.size(); ++i) {
      double acc = b2_[i];
      for (std::size_t j = 0; j < kH1; ++j) acc += w2_[i * kH1 + j] * pooled[j];
      code[i] = std::tanh(acc);
    }
    return code;
  }

  /// Latent code -> canonical point set whose axis-aligned bounding box
  /// is exactly [-0.5, 0.5]^3.
  std::vector<Vec3> decode(const std::vector<double>& code) const {
    if (static_cast<int>(code.size()) != code_dim_)
      throw ShapeError("shape codec: code length mismatch");
    std::vector<double> hidden(kDh);
    for (std::size_t i = 0; i < kDh; ++i) {
      double acc = db0_[i];
      for (std::size_t j = 0; j < code.size(); ++j)
        acc += dw0_[i * code.size() + j] * code[j];
      hidden[i] = std::tanh(acc);
    }
    std::vector<Vec3> pts;
    pts.reserve(base_.size());
    for (const auto& p : base_) {
      double out[3];
      for (std::size_t a = 0; a < 3; ++a) {
        const double* w = dw1_.data() + a * (3 + kDh);
        double acc = db1_[a] + w[0] * p.x + w[1] * p.y + w[2] * p.z;
        for (std::size_t j = 0; j < kDh; ++j) acc += w[3 + j] * hidden[j];
        out[a] = std::tanh(acc);
      }
      pts.push_back({p.x + 0.35 * out[0], p.y + 0.35 * out[1],
                     p.z + 0.35 * out[2]});
    }

    Vec3 lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
      lo = min_elem(lo, p);
      hi = max_elem(hi, p);
    }
    const Vec3 mid = (lo + hi) * 0.5;
    const Vec3 size = hi - lo;
    for (auto& p : pts) {
      p.x = size.x > 1e-12 ? (p.x - mid.x) / size.x : 0.0;
      p.y = size.y > 1e-12 ? (p.y - mid.y) / size.y : 0.0;
      p.z = size.z > 1e-12 ? (p.z - mid.z) / size.z : 0.0;
    }
    return pts;
  }

 private:
  static constexpr std::size_t kH0 = 64;
  static constexpr std::size_t kH1 = 128;
  static constexpr std::size_t kDh = 32;

  static void init_matrix(Rng& rng, std::vector<double>& m, std::size_t rows,
                          std::size_t cols) {
    m.resize(rows * cols);
    const double bound = std::sqrt(1.0 / static_cast<double>(cols == 1 ? rows : cols));
    for (double& v : m) v = rng.uniform(-bound, bound);
  }

  int code_dim_;
  int num_points_;
  std::vector<double> w0_, b0_, w1_, b1_, w2_, b2_;
  std::vector<double> dw0_, db0_, dw1_, db1_;
  std::vector<Vec3> base_;
};

}  // namespace sgae
