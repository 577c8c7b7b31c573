#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sgae/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sgae {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense float64 tensor participating in reverse-mode differentiation.
///
/// Forward operations record the computation graph into `parents` /
/// `backward_fn` of their result whenever an input requires gradients.
/// Values are immutable after recording by convention; only optimizer
/// updates and batch-norm running buffers mutate leaf values in place.
/// Backward closures accumulate (never assign) into `grad`, so a tensor
/// may feed any number of downstream operations.
class Tensor {
 public:
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same length as values
  bool requires_grad = false;
  std::string name;  // non-empty for registered parameters and buffers

  std::vector<TensorPtr> parents;
  std::function<void()> backward_fn;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shp, double fill = 0.0)
      : shape(std::move(shp)) {
    values.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<std::size_t>& shp) {
    std::size_t n = 1;
    for (std::size_t d : shp) n *= d;
    return n;
  }

  std::size_t numel() const { return values.size(); }

  std::size_t rows() const {
    if (shape.size() != 2) throw ShapeError("rows: tensor is not rank-2");
    return shape[0];
  }

  std::size_t cols() const {
    if (shape.size() != 2) throw ShapeError("cols: tensor is not rank-2");
    return shape[1];
  }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  static TensorPtr zeros(std::vector<std::size_t> shp) {
    return std::make_shared<Tensor>(std::move(shp));
  }

  static TensorPtr scalar(double v) {
    auto t = std::make_shared<Tensor>(std::vector<std::size_t>{1});
    t->values[0] = v;
    return t;
  }

  static TensorPtr row_major(std::size_t r, std::size_t c,
                             std::vector<double> data) {
    if (data.size() != r * c)
      throw ShapeError("row_major: data length does not match shape");
    auto t = std::make_shared<Tensor>(std::vector<std::size_t>{r, c});
    t->values = std::move(data);
    return t;
  }

  static TensorPtr vector1d(std::vector<double> data) {
    auto t = std::make_shared<Tensor>(std::vector<std::size_t>{data.size()});
    t->values = std::move(data);
    return t;
  }
};

inline void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values) {
    if (!std::isfinite(v))
      throw NumericError(std::string(op) + ": produced a non-finite value");
  }
}

namespace detail {

inline TensorPtr node(std::vector<std::size_t> shape,
                      std::initializer_list<TensorPtr> inputs) {
  auto out = std::make_shared<Tensor>(std::move(shape));
  for (const auto& in : inputs) {
    if (in->requires_grad) {
      out->requires_grad = true;
      break;
    }
  }
  if (out->requires_grad) out->parents.assign(inputs.begin(), inputs.end());
  return out;
}

inline TensorPtr node(std::vector<std::size_t> shape,
                      const std::vector<TensorPtr>& inputs) {
  auto out = std::make_shared<Tensor>(std::move(shape));
  for (const auto& in : inputs) {
    if (in->requires_grad) {
      out->requires_grad = true;
      break;
    }
  }
  if (out->requires_grad) out->parents = inputs;
  return out;
}

}  // namespace detail

/// Runs reverse-mode accumulation from a scalar root. Gradients of every
/// reachable tensor with requires_grad are accumulated into `grad`.
inline void backward(const TensorPtr& root, double seed = 1.0) {
  if (root->numel() != 1)
    throw ContractError("backward: root must be a scalar");
  if (!root->requires_grad)
    throw ContractError("backward: root does not require gradients");

  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> seen;
  struct Frame {
    Tensor* t;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.t->parents.size()) {
      Tensor* p = f.t->parents[f.next++].get();
      if (p->requires_grad && seen.insert(p).second)
        stack.push_back({p, 0});
    } else {
      order.push_back(f.t);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

/// y = x W^T + b with x [n,in], W [out,in], b [out] -> y [n,out].
inline TensorPtr affine(const TensorPtr& x, const TensorPtr& w,
                        const TensorPtr& b) {
  const std::size_t n = x->rows(), in = x->cols();
  if (w->shape.size() != 2 || w->cols() != in)
    throw ShapeError("affine: weight columns must match input columns");
  const std::size_t out_dim = w->rows();
  if (b->shape.size() != 1 || b->shape[0] != out_dim)
    throw ShapeError("affine: bias length must match weight rows");

  auto y = detail::node({n, out_dim}, {x, w, b});
  const double* X = x->values.data();
  const double* W = w->values.data();
  const double* B = b->values.data();
  double* Y = y->values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 1 && n * out_dim * in > 16384)
#endif
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
    const double* xr = X + r * in;
    double* yr = Y + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = W + o * in;
      double acc = B[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
  check_finite(*y, "affine");

  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* wp = w.get();
    Tensor* bp = b.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, wp, bp, yp, n, in, out_dim] {
      const double* dY = yp->grad.data();
      const double* X = xp->values.data();
      const double* W = wp->values.data();
      if (xp->requires_grad) {
        xp->ensure_grad();
        double* dX = xp->grad.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 1 && n * out_dim * in > 16384)
#endif
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
          const double* dyr = dY + r * out_dim;
          double* dxr = dX + r * in;
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = dyr[o];
            if (g == 0.0) continue;
            const double* wo = W + o * in;
            for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
          }
        }
      }
      if (wp->requires_grad) {
        wp->ensure_grad();
        double* dW = wp->grad.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (out_dim > 1 && n * out_dim * in > 16384)
#endif
        for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out_dim);
             ++o) {
          double* dwo = dW + o * in;
          for (std::size_t r = 0; r < n; ++r) {
            const double g = dY[r * out_dim + o];
            if (g == 0.0) continue;
            const double* xr = X + r * in;
            for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
          }
        }
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        double* dB = bp->grad.data();
        for (std::size_t o = 0; o < out_dim; ++o) {
          double acc = 0.0;
          for (std::size_t r = 0; r < n; ++r) acc += dY[r * out_dim + o];
          dB[o] += acc;
        }
      }
    };
  }
  return y;
}

inline TensorPtr relu(const TensorPtr& x) {
  auto y = detail::node(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i)
    y->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  check_finite(*y, "relu");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp] {
      xp->ensure_grad();
      for (std::size_t i = 0; i < xp->numel(); ++i)
        if (xp->values[i] > 0.0) xp->grad[i] += yp->grad[i];
    };
  }
  return y;
}

inline TensorPtr sigmoid(const TensorPtr& x) {
  auto y = detail::node(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i) {
    const double v = x->values[i];
    y->values[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
  }
  check_finite(*y, "sigmoid");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp] {
      xp->ensure_grad();
      for (std::size_t i = 0; i < xp->numel(); ++i) {
        const double s = yp->values[i];
        xp->grad[i] += yp->grad[i] * s * (1.0 - s);
      }
    };
  }
  return y;
}

inline TensorPtr exp_elem(const TensorPtr& x) {
  auto y = detail::node(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i)
    y->values[i] = std::exp(x->values[i]);
  check_finite(*y, "exp");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp] {
      xp->ensure_grad();
      for (std::size_t i = 0; i < xp->numel(); ++i)
        xp->grad[i] += yp->grad[i] * yp->values[i];
    };
  }
  return y;
}

/// Numerically stable row-wise softmax on a rank-2 tensor.
inline TensorPtr softmax_rows(const TensorPtr& x) {
  const std::size_t n = x->rows(), c = x->cols();
  if (c == 0) throw ShapeError("softmax_rows: zero columns");
  auto y = detail::node(x->shape, {x});
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x->values.data() + r * c;
    double* yr = y->values.data() + r * c;
    double m = xr[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, xr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - m);
      z += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] /= z;
  }
  check_finite(*y, "softmax_rows");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, n, c] {
      xp->ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        const double* yr = yp->values.data() + r * c;
        const double* dyr = yp->grad.data() + r * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += dyr[j] * yr[j];
        double* dxr = xp->grad.data() + r * c;
        for (std::size_t j = 0; j < c; ++j)
          dxr[j] += yr[j] * (dyr[j] - dot);
      }
    };
  }
  return y;
}

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  if (!a->same_shape(*b)) throw ShapeError("add: shape mismatch");
  auto y = detail::node(a->shape, {a, b});
  for (std::size_t i = 0; i < a->numel(); ++i)
    y->values[i] = a->values[i] + b->values[i];
  check_finite(*y, "add");
  if (y->requires_grad) {
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    Tensor* yp = y.get();
    y->backward_fn = [ap, bp, yp] {
      if (ap->requires_grad) {
        ap->ensure_grad();
        for (std::size_t i = 0; i < ap->numel(); ++i)
          ap->grad[i] += yp->grad[i];
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (std::size_t i = 0; i < bp->numel(); ++i)
          bp->grad[i] += yp->grad[i];
      }
    };
  }
  return y;
}

inline TensorPtr scale(const TensorPtr& x, double c) {
  auto y = detail::node(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i) y->values[i] = c * x->values[i];
  check_finite(*y, "scale");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, c] {
      xp->ensure_grad();
      for (std::size_t i = 0; i < xp->numel(); ++i)
        xp->grad[i] += c * yp->grad[i];
    };
  }
  return y;
}

/// Scales each row of a rank-2 tensor by a fixed (non-differentiable)
/// per-row weight. Used to mask rows, e.g. isolated graph nodes.
inline TensorPtr scale_rows(const TensorPtr& x, std::vector<double> weights) {
  const std::size_t n = x->rows(), c = x->cols();
  if (weights.size() != n)
    throw ShapeError("scale_rows: weight count must match rows");
  auto y = detail::node(x->shape, {x});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j)
      y->values[r * c + j] = weights[r] * x->values[r * c + j];
  check_finite(*y, "scale_rows");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, w = std::move(weights), n, c] {
      xp->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j)
          xp->grad[r * c + j] += w[r] * yp->grad[r * c + j];
    };
  }
  return y;
}

/// Column-wise concatenation of rank-2 tensors with equal row counts.
inline TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0]->rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->rows() != n) throw ShapeError("concat_cols: row count mismatch");
    total += p->cols();
  }
  auto y = detail::node({n, total}, parts);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p->cols();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(p->values.data() + r * c, c,
                  y->values.data() + r * total + off);
    off += c;
  }
  if (y->requires_grad) {
    std::vector<Tensor*> raw;
    raw.reserve(parts.size());
    for (const auto& p : parts) raw.push_back(p.get());
    Tensor* yp = y.get();
    y->backward_fn = [raw, yp, n, total] {
      std::size_t off = 0;
      for (Tensor* p : raw) {
        const std::size_t c = p->cols();
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < c; ++j)
              p->grad[r * c + j] += yp->grad[r * total + off + j];
        }
        off += c;
      }
    };
  }
  return y;
}

inline TensorPtr slice_cols(const TensorPtr& x, std::size_t start,
                            std::size_t len) {
  const std::size_t n = x->rows(), c = x->cols();
  if (start + len > c) throw ShapeError("slice_cols: range out of bounds");
  auto y = detail::node({n, len}, {x});
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(x->values.data() + r * c + start, len,
                y->values.data() + r * len);
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, start, len, n, c] {
      xp->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < len; ++j)
          xp->grad[r * c + start + j] += yp->grad[r * len + j];
    };
  }
  return y;
}

/// y[r] = x[index[r]]; rows may repeat.
inline TensorPtr gather_rows(const TensorPtr& x,
                             std::vector<std::size_t> index) {
  const std::size_t n = x->rows(), c = x->cols();
  for (std::size_t i : index)
    if (i >= n) throw ShapeError("gather_rows: index out of bounds");
  auto y = detail::node({index.size(), c}, {x});
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(x->values.data() + index[r] * c, c, y->values.data() + r * c);
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, idx = std::move(index), c] {
      xp->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < c; ++j)
          xp->grad[idx[r] * c + j] += yp->grad[r * c + j];
    };
  }
  return y;
}

/// Column-wise max over all rows of a rank-2 tensor -> rank-1 [d].
/// Gradient routes to the first row attaining each maximum, which keeps
/// the operation bit-exact under point permutation and duplication.
inline TensorPtr max_pool_rows(const TensorPtr& x) {
  const std::size_t n = x->rows(), c = x->cols();
  if (n == 0) throw ContractError("max_pool_rows: empty point set");
  auto y = detail::node(std::vector<std::size_t>{c}, {x});
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = x->values[j];
    std::size_t bi = 0;
    for (std::size_t r = 1; r < n; ++r) {
      const double v = x->values[r * c + j];
      if (v > best) {
        best = v;
        bi = r;
      }
    }
    y->values[j] = best;
    arg[j] = bi;
  }
  check_finite(*y, "max_pool_rows");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, arg = std::move(arg), c] {
      xp->ensure_grad();
      for (std::size_t j = 0; j < c; ++j)
        xp->grad[arg[j] * c + j] += yp->grad[j];
    };
  }
  return y;
}

/// Per-segment column-wise max. `offsets` has S+1 ascending entries with
/// offsets[0] == 0 and offsets[S] == rows; every segment must be non-empty.
/// Output is [S, d]. Same first-argmax gradient routing as max_pool_rows.
inline TensorPtr segment_max_pool(const TensorPtr& x,
                                  const std::vector<std::size_t>& offsets) {
  const std::size_t n = x->rows(), c = x->cols();
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != n)
    throw ContractError("segment_max_pool: bad offsets");
  const std::size_t s = offsets.size() - 1;
  for (std::size_t k = 0; k < s; ++k)
    if (offsets[k + 1] <= offsets[k])
      throw ContractError("segment_max_pool: empty point set");
  auto y = detail::node({s, c}, {x});
  std::vector<std::size_t> arg(s * c, 0);
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t j = 0; j < c; ++j) {
      double best = x->values[offsets[k] * c + j];
      std::size_t bi = offsets[k];
      for (std::size_t r = offsets[k] + 1; r < offsets[k + 1]; ++r) {
        const double v = x->values[r * c + j];
        if (v > best) {
          best = v;
          bi = r;
        }
      }
      y->values[k * c + j] = best;
      arg[k * c + j] = bi;
    }
  }
  check_finite(*y, "segment_max_pool");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, arg = std::move(arg), s, c] {
      xp->ensure_grad();
      for (std::size_t k = 0; k < s; ++k)
        for (std::size_t j = 0; j < c; ++j)
          xp->grad[arg[k * c + j] * c + j] += yp->grad[k * c + j];
    };
  }
  return y;
}

/// Averages per-edge messages into per-node aggregates.
///
/// Node i receives subj[e] for every edge e with src[e] == i and obj[e]
/// for every edge with dst[e] == i, divided by its total incident edge
/// count. Nodes with no incident edges get a zero row.
inline TensorPtr mean_incident(const TensorPtr& subj, const TensorPtr& obj,
                               const std::vector<std::size_t>& src,
                               const std::vector<std::size_t>& dst,
                               std::size_t num_nodes) {
  const std::size_t e = subj->rows(), c = subj->cols();
  if (obj->rows() != e || obj->cols() != c)
    throw ShapeError("mean_incident: subject/object shape mismatch");
  if (src.size() != e || dst.size() != e)
    throw ShapeError("mean_incident: endpoint count must match edge rows");
  for (std::size_t i = 0; i < e; ++i)
    if (src[i] >= num_nodes || dst[i] >= num_nodes)
      throw ShapeError("mean_incident: endpoint index out of bounds");

  std::vector<double> inv_count(num_nodes, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    inv_count[src[i]] += 1.0;
    inv_count[dst[i]] += 1.0;
  }
  for (double& v : inv_count) v = v > 0.0 ? 1.0 / v : 0.0;

  auto y = detail::node({num_nodes, c}, {subj, obj});
  for (std::size_t i = 0; i < e; ++i) {
    double* rs = y->values.data() + src[i] * c;
    double* ro = y->values.data() + dst[i] * c;
    const double* ms = subj->values.data() + i * c;
    const double* mo = obj->values.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      rs[j] += inv_count[src[i]] * ms[j];
      ro[j] += inv_count[dst[i]] * mo[j];
    }
  }
  check_finite(*y, "mean_incident");
  if (y->requires_grad) {
    Tensor* sp = subj.get();
    Tensor* op = obj.get();
    Tensor* yp = y.get();
    y->backward_fn = [sp, op, yp, src, dst, inv = std::move(inv_count), c] {
      sp->ensure_grad();
      op->ensure_grad();
      for (std::size_t i = 0; i < src.size(); ++i) {
        const double* gs = yp->grad.data() + src[i] * c;
        const double* go = yp->grad.data() + dst[i] * c;
        for (std::size_t j = 0; j < c; ++j) {
          sp->grad[i * c + j] += inv[src[i]] * gs[j];
          op->grad[i * c + j] += inv[dst[i]] * go[j];
        }
      }
    };
  }
  return y;
}

/// Weighted sum of all elements with fixed (non-differentiable) weights,
/// yielding a scalar.
inline TensorPtr sum_weighted(const TensorPtr& x, std::vector<double> weights) {
  if (weights.size() != x->numel())
    throw ShapeError("sum_weighted: one weight per element required");
  auto y = detail::node(std::vector<std::size_t>{1}, {x});
  double acc = 0.0;
  for (std::size_t i = 0; i < x->numel(); ++i)
    acc += weights[i] * x->values[i];
  y->values[0] = acc;
  check_finite(*y, "sum_weighted");
  if (y->requires_grad) {
    Tensor* xp = x.get();
    Tensor* yp = y.get();
    y->backward_fn = [xp, yp, w = std::move(weights)] {
      xp->ensure_grad();
      for (std::size_t i = 0; i < xp->numel(); ++i)
        xp->grad[i] += w[i] * yp->grad[0];
    };
  }
  return y;
}

/// Mean of several scalars; used to average per-scene losses in a batch.
inline TensorPtr mean_scalars(const std::vector<TensorPtr>& xs) {
  if (xs.empty()) throw ContractError("mean_scalars: no inputs");
  for (const auto& x : xs)
    if (x->numel() != 1) throw ShapeError("mean_scalars: inputs must be scalar");
  auto y = detail::node(std::vector<std::size_t>{1}, xs);
  double acc = 0.0;
  for (const auto& x : xs) acc += x->values[0];
  y->values[0] = acc / static_cast<double>(xs.size());
  check_finite(*y, "mean_scalars");
  if (y->requires_grad) {
    std::vector<Tensor*> raw;
    raw.reserve(xs.size());
    for (const auto& x : xs) raw.push_back(x.get());
    Tensor* yp = y.get();
    y->backward_fn = [raw, yp] {
      const double g = yp->grad[0] / static_cast<double>(raw.size());
      for (Tensor* x : raw) {
        if (!x->requires_grad) continue;
        x->ensure_grad();
        x->grad[0] += g;
      }
    };
  }
  return y;
}

}  // namespace sgae
