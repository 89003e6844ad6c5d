#pragma once

#include "muwarm/tensor.hpp"

#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace muwarm {

template <typename Scalar>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<Scalar>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<Scalar>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return graph_->requires_grad(id_); }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<Scalar>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in topological order, so backward
/// is a single reverse sweep. Parameter leaves alias caller-owned tensors and
/// accumulate into their grad buffers.
template <typename Scalar>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  /// With grad_enabled = false, parameter leaves do not require gradients and
  /// no backward closures are kept (inference mode).
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(Tensor<Scalar> value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, false, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  /// Leaf that aliases `param` (no copy). Gradients land in param.grad().
  Var<Scalar> parameter(Tensor<Scalar>& param) {
    nodes_.push_back(Node{{}, &param, {}, grad_enabled_, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  /// Leaf owning a copy of `value` whose gradient is kept on the node.
  Var<Scalar> variable(Tensor<Scalar> value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, true, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  Var<Scalar> record(Tensor<Scalar> value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, requires_grad, requires_grad ? std::move(backward) : BackwardFn{}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Tensor<Scalar>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Vector<Scalar>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.external) return n.external->grad();
    if (n.grad.size() != n.owned.size()) n.grad = Vector<Scalar>::Zero(n.owned.size());
    return n.grad;
  }
  MatrixMap<Scalar> grad_matrix(std::size_t id) {
    const Tensor<Scalar>& v = value(id);
    return MatrixMap<Scalar>(grad(id).data(), v.rows(), v.cols());
  }

  /// Seeds d(root)/d(root) = 1 (root must be a single element) and sweeps.
  void backward(const Var<Scalar>& root) {
    if (value(root.id()).size() != 1) throw DimensionError("backward requires a scalar root");
    if (!requires_grad(root.id())) return;
    grad(root.id()).setOnes();
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() > 0) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Tensor<Scalar> owned;
    Tensor<Scalar>* external;
    Vector<Scalar> grad;
    bool requires_grad;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

namespace detail {

template <typename Scalar>
bool any_requires_grad(std::initializer_list<Var<Scalar>> vars) {
  for (const auto& v : vars)
    if (v.requires_grad()) return true;
  return false;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<Scalar> out(a.shape(), a.value().flat() + b.value().flat());
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), detail::any_requires_grad({a, b}), [ia, ib](Graph<Scalar>& g, std::size_t self) {
    if (g.requires_grad(ia)) g.grad(ia) += g.grad(self);
    if (g.requires_grad(ib)) g.grad(ib) += g.grad(self);
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<Scalar> out(a.shape(), a.value().flat().cwiseProduct(b.value().flat()));
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), detail::any_requires_grad({a, b}), [ia, ib](Graph<Scalar>& g, std::size_t self) {
    if (g.requires_grad(ia)) g.grad(ia) += g.grad(self).cwiseProduct(g.value(ib).flat());
    if (g.requires_grad(ib)) g.grad(ib) += g.grad(self).cwiseProduct(g.value(ia).flat());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), a.value().flat() * s);
  const auto ia = a.id();
  return a.graph().record(std::move(out), a.requires_grad(), [ia, s](Graph<Scalar>& g, std::size_t self) {
    g.grad(ia) += g.grad(self) * s;
  });
}

/// x[rows x d] + bias[d] broadcast over rows.
template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& bias) {
  detail::require(bias.value().size() == x.value().cols(), "add_bias: bias length must equal last extent");
  Tensor<Scalar> out = x.value();
  out.matrix().rowwise() += bias.value().flat().transpose();
  const auto ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(out), detail::any_requires_grad({x, bias}), [ix, ib](Graph<Scalar>& g, std::size_t self) {
    if (g.requires_grad(ix)) g.grad(ix) += g.grad(self);
    if (g.requires_grad(ib)) g.grad(ib) += g.grad_matrix(self).colwise().sum().transpose();
  });
}

/// Sum of all elements, as a one-element tensor.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Tensor<Scalar> out(Shape{1});
  out[0] = a.value().flat().sum();
  const auto ia = a.id();
  return a.graph().record(std::move(out), a.requires_grad(), [ia](Graph<Scalar>& g, std::size_t self) {
    g.grad(ia).array() += g.grad(self)[0];
  });
}

/// tanh-approximated GELU.
namespace detail {
template <typename Scalar>
inline constexpr Scalar kGeluC = Scalar(0.7978845608028654);  // sqrt(2/pi)
template <typename Scalar>
inline constexpr Scalar kGeluCubic = Scalar(0.044715);
}  // namespace detail

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  constexpr Scalar kC = detail::kGeluC<Scalar>;
  constexpr Scalar kCubic = detail::kGeluCubic<Scalar>;
  const auto& x = a.value().flat();
  Vector<Scalar> t = (kC * (x.array() + kCubic * x.array().cube())).tanh().matrix();
  Tensor<Scalar> out(a.shape(), (Scalar(0.5) * x.array() * (Scalar(1) + t.array())).matrix());
  const auto ia = a.id();
  return a.graph().record(std::move(out), a.requires_grad(), [ia, t = std::move(t)](Graph<Scalar>& g, std::size_t self) {
    constexpr Scalar kC = detail::kGeluC<Scalar>;
    constexpr Scalar kCubic = detail::kGeluCubic<Scalar>;
    const auto& x = g.value(ia).flat().array();
    const auto dt = kC * (Scalar(1) + Scalar(3) * kCubic * x.square());
    const auto local = Scalar(0.5) * (Scalar(1) + t.array()) + Scalar(0.5) * x * (Scalar(1) - t.array().square()) * dt;
    g.grad(ia).array() += g.grad(self).array() * local;
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m x k] . b[k x n]. Leading extents of `a` are flattened into m.
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  detail::require(bv.shape().size() == 2, "matmul: right operand must be 2-D");
  detail::require(av.cols() == bv.rows(),
                  "matmul: inner extents differ " + to_string(av.shape()) + " . " + to_string(bv.shape()));
  Shape shape = av.shape();
  shape.back() = bv.cols();
  Tensor<Scalar> out(shape);
  out.matrix().noalias() = av.matrix() * bv.matrix();
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), detail::any_requires_grad({a, b}), [ia, ib](Graph<Scalar>& g, std::size_t self) {
    auto dc = g.grad_matrix(self);
    if (g.requires_grad(ia)) g.grad_matrix(ia).noalias() += dc * g.value(ib).matrix().transpose();
    if (g.requires_grad(ib)) g.grad_matrix(ib).noalias() += g.value(ia).matrix().transpose() * dc;
  });
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-row standardization over the last extent followed by gain/bias.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gain, const Var<Scalar>& bias, Scalar eps = Scalar(1e-5)) {
  const auto& xv = x.value();
  const Index d = xv.cols();
  detail::require(gain.value().size() == d && bias.value().size() == d,
                  "layer_norm: gain/bias length must equal last extent " + std::to_string(d));
  const Index rows = xv.rows();
  auto xm = xv.matrix();
  Vector<Scalar> rstd(rows);
  Matrix<Scalar> xhat(rows, d);
  for (Index r = 0; r < rows; ++r) {
    const Scalar mean = xm.row(r).mean();
    const auto centered = (xm.row(r).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / Scalar(d);
    rstd[r] = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = centered * rstd[r];
  }
  Tensor<Scalar> out(xv.shape());
  out.matrix() = (xhat.array().rowwise() * gain.value().flat().transpose().array()).rowwise() +
                 bias.value().flat().transpose().array();
  const auto ix = x.id(), ig = gain.id(), ibias = bias.id();
  return x.graph().record(
      std::move(out), detail::any_requires_grad({x, gain, bias}),
      [ix, ig, ibias, rstd = std::move(rstd), xhat = std::move(xhat)](Graph<Scalar>& g, std::size_t self) {
        auto dy = g.grad_matrix(self);
        if (g.requires_grad(ig)) g.grad(ig) += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
        if (g.requires_grad(ibias)) g.grad(ibias) += dy.colwise().sum().transpose();
        if (!g.requires_grad(ix)) return;
        auto dx = g.grad_matrix(ix);
        const auto gain_row = g.value(ig).flat().transpose().array();
        const Index d = xhat.cols();
        for (Index r = 0; r < xhat.rows(); ++r) {
          const auto dxhat = (dy.row(r).array() * gain_row).eval();
          const Scalar mean_dxhat = dxhat.sum() / Scalar(d);
          const Scalar mean_dxhat_xhat = (dxhat * xhat.row(r).array()).sum() / Scalar(d);
          dx.row(r).array() += rstd[r] * (dxhat - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat);
        }
      });
}

// ---------------------------------------------------------------------------
// Embedding

/// Rows of `table` selected by `ids`; backward scatter-adds into the table.
template <typename Scalar>
Var<Scalar> embedding_gather(const Var<Scalar>& table, std::span<const int> ids) {
  const auto& tv = table.value();
  detail::require(tv.shape().size() == 2, "embedding_gather: table must be 2-D");
  const Index n = static_cast<Index>(ids.size());
  Tensor<Scalar> out(Shape{n, tv.cols()});
  auto om = out.matrix();
  auto tm = tv.matrix();
  for (Index i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= tv.rows()) throw IndexError("embedding_gather: id " + std::to_string(id) + " out of range");
    om.row(i) = tm.row(id);
  }
  const auto it = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return table.graph().record(std::move(out), table.requires_grad(), [it, idx = std::move(idx)](Graph<Scalar>& g, std::size_t self) {
    auto dy = g.grad_matrix(self);
    auto dt = g.grad_matrix(it);
    for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += dy.row(static_cast<Index>(i));
  });
}

// ---------------------------------------------------------------------------
// Softmax family

namespace detail {

/// In-place causal softmax on a T x T block: row i keeps columns 0..i.
template <typename Derived>
void causal_softmax_block(Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Index t = s.rows();
  for (Index i = 0; i < t; ++i) {
    auto row = s.row(i).head(i + 1);
    const Scalar mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
    s.row(i).tail(t - i - 1).setZero();
  }
}

/// dS = P o (dP - rowsum(dP o P)), accumulated into `ds`.
template <typename P, typename DP, typename DS>
void softmax_backward_block(const P& p, const DP& dp, DS&& ds) {
  const auto inner = (dp.array() * p.array()).rowwise().sum().eval();
  ds.array() += p.array() * (dp.array().colwise() - inner);
}

}  // namespace detail

/// Causal softmax applied independently to each trailing T x T block of
/// `scores` (shape [..., T, T]). Entries above the diagonal come out as 0.
template <typename Scalar>
Var<Scalar> causal_masked_softmax(const Var<Scalar>& scores) {
  const auto& sv = scores.value();
  detail::require(sv.shape().size() >= 2, "causal_masked_softmax: need at least 2 extents");
  const Index t = sv.cols();
  detail::require(sv.dim(sv.shape().size() - 2) == t, "causal_masked_softmax: trailing block must be square");
  Tensor<Scalar> out = sv;
  const Index blocks = sv.rows() / t;
  auto om = out.matrix();
  for (Index b = 0; b < blocks; ++b) {
    auto block = om.middleRows(b * t, t);
    detail::causal_softmax_block(block);
  }
  const auto is = scores.id();
  return scores.graph().record(std::move(out), scores.requires_grad(), [is, t, blocks](Graph<Scalar>& g, std::size_t self) {
    const auto p = g.value(self).matrix();
    auto dp = g.grad_matrix(self);
    auto ds = g.grad_matrix(is);
    for (Index b = 0; b < blocks; ++b)
      detail::softmax_backward_block(p.middleRows(b * t, t), dp.middleRows(b * t, t), ds.middleRows(b * t, t));
  });
}

/// Multi-head causal self-attention on row-major [batch*seq x heads*head_size]
/// projections. Head h occupies columns [h*head_size, (h+1)*head_size).
template <typename Scalar>
Var<Scalar> causal_self_attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v, Index batch, Index seq,
                                  Index heads, Scalar logit_scale) {
  const auto& qv = q.value();
  detail::require(qv.shape() == k.shape() && qv.shape() == v.shape(), "attention: q/k/v shapes differ");
  detail::require(qv.rows() == batch * seq, "attention: rows must equal batch*seq");
  detail::require(heads > 0 && qv.cols() % heads == 0, "attention: width not divisible by heads");
  const Index hs = qv.cols() / heads;
  auto qm = qv.matrix();
  auto km = k.value().matrix();
  auto vm = v.value().matrix();
  Tensor<Scalar> out(qv.shape());
  auto om = out.matrix();
  // probs holds one T x T block per (batch, head), stacked.
  Matrix<Scalar> probs(batch * heads * seq, seq);
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      auto pb = probs.middleRows((b * heads + h) * seq, seq);
      const auto qb = qm.block(b * seq, h * hs, seq, hs);
      const auto kb = km.block(b * seq, h * hs, seq, hs);
      pb.noalias() = logit_scale * (qb * kb.transpose());
      detail::causal_softmax_block(pb);
      om.block(b * seq, h * hs, seq, hs).noalias() = pb * vm.block(b * seq, h * hs, seq, hs);
    }
  }
  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.graph().record(
      std::move(out), detail::any_requires_grad({q, k, v}),
      [iq, ik, iv, batch, seq, heads, hs, logit_scale, probs = std::move(probs)](Graph<Scalar>& g, std::size_t self) {
        const auto qm = g.value(iq).matrix();
        const auto km = g.value(ik).matrix();
        const auto vm = g.value(iv).matrix();
        auto dout = g.grad_matrix(self);
        auto dq = g.grad_matrix(iq);
        auto dk = g.grad_matrix(ik);
        auto dv = g.grad_matrix(iv);
        Matrix<Scalar> dp(seq, seq), ds(seq, seq);
        for (Index b = 0; b < batch; ++b) {
          for (Index h = 0; h < heads; ++h) {
            const auto pb = probs.middleRows((b * heads + h) * seq, seq);
            const auto dob = dout.block(b * seq, h * hs, seq, hs);
            dv.block(b * seq, h * hs, seq, hs).noalias() += pb.transpose() * dob;
            dp.noalias() = dob * vm.block(b * seq, h * hs, seq, hs).transpose();
            ds.setZero();
            detail::softmax_backward_block(pb, dp, ds);
            ds *= logit_scale;
            dq.block(b * seq, h * hs, seq, hs).noalias() += ds * km.block(b * seq, h * hs, seq, hs);
            dk.block(b * seq, h * hs, seq, hs).noalias() += ds.transpose() * qm.block(b * seq, h * hs, seq, hs);
          }
        }
      });
}

/// Mean over rows of -log softmax(logits)[target]. Returns a one-element tensor.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::span<const int> targets) {
  const auto& lv = logits.value();
  const Index rows = lv.rows();
  const Index classes = lv.cols();
  if (static_cast<Index>(targets.size()) != rows) throw DimensionError("softmax_cross_entropy: one target per row required");
  for (int t : targets)
    if (t < 0 || t >= classes) throw IndexError("softmax_cross_entropy: target " + std::to_string(t) + " out of range");
  auto lm = lv.matrix();
  Matrix<Scalar> probs(rows, classes);
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const Scalar mx = lm.row(r).maxCoeff();
    probs.row(r) = (lm.row(r).array() - mx).exp().matrix();
    const Scalar z = probs.row(r).sum();
    probs.row(r) /= z;
    const int t = targets[static_cast<std::size_t>(r)];
    total += static_cast<double>(std::log(z) + mx - lm(r, t));
  }
  Tensor<Scalar> out(Shape{1});
  out[0] = static_cast<Scalar>(total / static_cast<double>(rows));
  const auto il = logits.id();
  std::vector<int> tgt(targets.begin(), targets.end());
  return logits.graph().record(std::move(out), logits.requires_grad(),
                               [il, probs = std::move(probs), tgt = std::move(tgt)](Graph<Scalar>& g, std::size_t self) mutable {
                                 const Scalar upstream = g.grad(self)[0] / Scalar(probs.rows());
                                 auto dl = g.grad_matrix(il);
                                 for (Index r = 0; r < probs.rows(); ++r) {
                                   dl.row(r) += upstream * probs.row(r);
                                   dl(r, tgt[static_cast<std::size_t>(r)]) -= upstream;
                                 }
                               });
}

}  // namespace muwarm
