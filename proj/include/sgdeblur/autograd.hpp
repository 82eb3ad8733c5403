#pragma once

// Reverse-mode differentiation over Tensor values.
//
// Every backward rule is written in terms of the same differentiable ops, so
// calling grad() with create_graph = true yields gradients that can themselves
// be differentiated. The critic's gradient penalty relies on this.

#include <functional>
#include <memory>
#include <vector>

#include "sgdeblur/tensor.hpp"

namespace sgdeblur::ag {

class Var;
using BackwardFn = std::function<std::vector<Var>(const Var&, const std::vector<bool>&)>;

namespace detail {
struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  // Maps the gradient w.r.t. this node to gradients w.r.t. each input.
  // Entries whose `needed` flag is false may be left undefined.
  BackwardFn backward;
};
}  // namespace detail

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// In-place update of a leaf's value (optimizer steps). Shape must match.
  void assign(const Tensor& t);
  Tensor& mutable_value() { return node_->value; }

  detail::Node* node() const { return node_.get(); }

 private:
  friend Var make_result(Tensor, std::vector<Var>, BackwardFn);
  std::shared_ptr<detail::Node> node_;
};

/// Records a result node. Inputs and backward are dropped when graph
/// recording is disabled or no input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward);

/// RAII switch for graph recording (thread local).
class GradMode {
 public:
  explicit GradMode(bool enabled);
  ~GradMode();
  GradMode(const GradMode&) = delete;
  GradMode& operator=(const GradMode&) = delete;

  static bool enabled();

 private:
  bool previous_;
};

struct NoGrad : GradMode {
  NoGrad() : GradMode(false) {}
};

/// Gradients of a scalar output w.r.t. each of `wrt`. Unreached inputs get zeros.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph = false);

// Elementwise, shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var mul_mask(const Var& a, const Tensor& mask);
Var leaky_relu(const Var& a, float slope);
Var tanh(const Var& a);
Var clamp(const Var& a, float lo, float hi);
/// a^p for a > 0 and 0 elsewhere; used for norms that must stay finite at 0.
Var masked_pow(const Var& a, float p);

// Reductions and broadcasts.
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var expand_scalar(const Var& s, const Shape& shape);
/// {C, H, W} -> {C}
Var channel_sum(const Var& x);
/// {C} -> {C, H, W}
Var broadcast_channel(const Var& v, int height, int width);
/// {C, H, W} -> {1, H, W}
Var sum_channels(const Var& x);
/// {1, H, W} -> {C, H, W}
Var repeat_channels(const Var& x, int channels);

// Per-channel ops on {C, H, W} with a {C} vector.
Var add_channel(const Var& x, const Var& v);
Var scale_channel(const Var& x, const Var& v);
/// {C}: sum over H, W of a * b.
Var channel_dot(const Var& a, const Var& b);
/// (x - mean_c) / sqrt(var_c + eps) with biased per-channel statistics.
Var standardize(const Var& x, float eps);
/// Vector-Jacobian product of standardize at x. Differentiable once more
/// (enough for gradient penalties); a third derivative throws.
Var standardize_backward(const Var& g, const Var& x, float eps);

// Spatial ops on {C, H, W}.
Var pad(const Var& x, int p);
Var crop(const Var& x, int p);

/// Unpadded cross-correlation of x {C, H, W} with w {O, C, k, k}.
Var conv2d(const Var& x, const Var& w);
Var conv2d(const Var& x, const Var& w, const Var& bias);
/// Adjoint of conv2d w.r.t. its input; result is {C, height, width}.
Var conv2d_input_grad(const Var& g, const Var& w, int height, int width);
/// Adjoint of conv2d w.r.t. its weight; result is {O, C, k, k}.
Var conv2d_weight_grad(const Var& x, const Var& g, int k);

}  // namespace sgdeblur::ag
