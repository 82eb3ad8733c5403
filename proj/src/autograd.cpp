#include "sgdeblur/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "sgdeblur/error.hpp"

namespace sgdeblur::ag {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

void require_rank3(const Var& x, const char* op) {
  if (x.shape().size() != 3) throw InvalidInput(std::string(op) + ": expected {C, H, W}, got " + shape_string(x.shape()));
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

// Columns are (c, ky, kx) rows by (y, x) output positions.
RowMat im2col(const Tensor& x, int k) {
  const int channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const int out_h = height - k + 1, out_w = width - k + 1;
  RowMat cols(static_cast<Eigen::Index>(channels) * k * k, static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int y = 0; y < out_h; ++y) {
          const float* src = x.data() + (static_cast<std::size_t>(c) * height + y + ky) * width + kx;
          std::copy(src, src + out_w, row + static_cast<std::size_t>(y) * out_w);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMat& cols, int channels, int height, int width, int k, Tensor& out) {
  const int out_h = height - k + 1, out_w = width - k + 1;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int y = 0; y < out_h; ++y) {
          float* dst = out.data() + (static_cast<std::size_t>(c) * height + y + ky) * width + kx;
          const float* src = row + static_cast<std::size_t>(y) * out_w;
          for (int x = 0; x < out_w; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& x, const Tensor& w) {
  const int out_ch = w.dim(0), k = w.dim(2);
  const int out_h = x.dim(1) - k + 1, out_w = x.dim(2) - k + 1;
  Tensor out({out_ch, out_h, out_w});
  const RowMat cols = im2col(x, k);
  ConstMapMat wm(w.data(), out_ch, cols.rows());
  MapMat om(out.data(), out_ch, cols.cols());
  om.noalias() = wm * cols;
  return out;
}

Tensor conv_input_adjoint(const Tensor& g, const Tensor& w, int height, int width) {
  const int out_ch = w.dim(0), in_ch = w.dim(1), k = w.dim(2);
  ConstMapMat wm(w.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
  ConstMapMat gm(g.data(), out_ch, static_cast<Eigen::Index>(g.dim(1)) * g.dim(2));
  RowMat cols = wm.transpose() * gm;
  Tensor out({in_ch, height, width});
  col2im_add(cols, in_ch, height, width, k, out);
  return out;
}

Tensor conv_weight_adjoint(const Tensor& x, const Tensor& g, int k) {
  const int out_ch = g.dim(0), in_ch = x.dim(0);
  const RowMat cols = im2col(x, k);
  ConstMapMat gm(g.data(), out_ch, cols.cols());
  Tensor out({out_ch, in_ch, k, k});
  MapMat om(out.data(), out_ch, cols.rows());
  om.noalias() = gm * cols.transpose();
  return out;
}

}  // namespace

GradMode::GradMode(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradMode::~GradMode() { g_grad_enabled = previous_; }
bool GradMode::enabled() { return g_grad_enabled; }

Var Var::constant(Tensor value) {
  Var v;
  v.node_ = std::make_shared<detail::Node>();
  v.node_->value = std::move(value);
  return v;
}

Var Var::parameter(Tensor value) {
  Var v = constant(std::move(value));
  v.node_->requires_grad = true;
  return v;
}

void Var::assign(const Tensor& t) {
  if (t.shape() != node_->value.shape()) throw InvalidInput("assign: shape mismatch");
  node_->value = t;
}

Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Var v = Var::constant(std::move(value));
  if (!GradMode::enabled()) return v;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& i) { return i.requires_grad(); });
  if (!any) return v;
  v.node_->requires_grad = true;
  v.node_->inputs = std::move(inputs);
  v.node_->backward = std::move(backward);
  return v;
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph) {
  if (output.value().size() != 1) throw InvalidInput("grad: output must be a scalar");

  std::unordered_set<detail::Node*> keep;
  for (const Var& w : wrt) keep.insert(w.node());

  // Post-order over nodes that require grad; `relevant` marks nodes with a
  // path to some element of `wrt`.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> relevant;
  if (output.requires_grad()) {
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<const Var*, std::size_t>> stack{{&output, 0}};
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [var, next] = stack.back();
      detail::Node* node = var->node();
      if (next < node->inputs.size()) {
        const Var& in = node->inputs[next++];
        if (in.requires_grad() && visited.insert(in.node()).second) stack.emplace_back(&in, 0);
      } else {
        bool reaches = keep.count(node) > 0;
        for (const Var& in : node->inputs) reaches = reaches || relevant.count(in.node()) > 0;
        if (reaches) {
          relevant.insert(node);
          order.push_back(node);
        }
        stack.pop_back();
      }
    }
  }

  GradMode mode(create_graph);
  std::unordered_map<detail::Node*, Var> grads;
  if (output.requires_grad()) grads[output.node()] = Var::constant(Tensor(output.shape(), 1.0f));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end() || !node->backward) continue;
    const Var upstream = found->second;
    if (!keep.count(node)) grads.erase(found);
    std::vector<bool> needed(node->inputs.size());
    for (std::size_t i = 0; i < needed.size(); ++i) needed[i] = relevant.count(node->inputs[i].node()) > 0;
    std::vector<Var> in_grads = node->backward(upstream, needed);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Var& in = node->inputs[i];
      if (!needed[i] || !in_grads[i].defined()) continue;
      auto slot = grads.find(in.node());
      if (slot == grads.end()) {
        grads.emplace(in.node(), in_grads[i]);
      } else {
        slot->second = add(slot->second, in_grads[i]);
      }
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto found = grads.find(w.node());
    result.push_back(found != grads.end() ? found->second : Var::constant(Tensor(w.shape())));
  }
  return result;
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_result(map_binary(a.value(), b.value(), [](float x, float y) { return x + y; }), {a, b},
                     [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_result(map_binary(a.value(), b.value(), [](float x, float y) { return x - y; }), {a, b},
                     [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, scale(g, -1.0f)}; });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_result(map_binary(a.value(), b.value(), [](float x, float y) { return x * y; }), {a, b},
                     [a, b](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, b), mul(g, a)}; });
}

Var scale(const Var& a, float s) {
  return make_result(map_unary(a.value(), [s](float x) { return x * s; }), {a},
                     [s](const Var& g, const std::vector<bool>&) { return std::vector<Var>{scale(g, s)}; });
}

Var add_scalar(const Var& a, float s) {
  return make_result(map_unary(a.value(), [s](float x) { return x + s; }), {a},
                     [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; });
}

Var mul_mask(const Var& a, const Tensor& mask) {
  if (a.shape() != mask.shape()) throw InvalidInput("mul_mask: shape mismatch");
  return make_result(map_binary(a.value(), mask, [](float x, float m) { return x * m; }), {a},
                     [mask](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul_mask(g, mask)}; });
}

Var leaky_relu(const Var& a, float slope) {
  Tensor mask = map_unary(a.value(), [slope](float x) { return x > 0.0f ? 1.0f : slope; });
  Tensor out = map_binary(a.value(), mask, [](float x, float m) { return x * m; });
  return make_result(std::move(out), {a},
                     [mask = std::move(mask)](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul_mask(g, mask)}; });
}

Var tanh(const Var& a) {
  return make_result(map_unary(a.value(), [](float x) { return std::tanh(x); }), {a}, [a](const Var& g, const std::vector<bool>&) {
    const Var t = tanh(a);
    return std::vector<Var>{mul(g, add_scalar(scale(mul(t, t), -1.0f), 1.0f))};
  });
}

Var clamp(const Var& a, float lo, float hi) {
  Tensor mask = map_unary(a.value(), [lo, hi](float x) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
  return make_result(map_unary(a.value(), [lo, hi](float x) { return std::clamp(x, lo, hi); }), {a},
                     [mask = std::move(mask)](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul_mask(g, mask)}; });
}

Var masked_pow(const Var& a, float p) {
  return make_result(map_unary(a.value(), [p](float x) { return x > 0.0f ? std::pow(x, p) : 0.0f; }), {a},
                     [a, p](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, scale(masked_pow(a, p - 1.0f), p))}; });
}

Var sum_all(const Var& a) {
  double total = 0.0;
  for (float v : a.value().values()) total += v;
  return make_result(Tensor::scalar(static_cast<float>(total)), {a}, [shape = a.shape()](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{expand_scalar(g, shape)};
  });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0f / static_cast<float>(a.value().size())); }

Var expand_scalar(const Var& s, const Shape& shape) {
  if (s.value().size() != 1) throw InvalidInput("expand_scalar: input must be a scalar");
  return make_result(Tensor(shape, s.value()[0]), {s}, [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sum_all(g)}; });
}

Var channel_sum(const Var& x) {
  require_rank3(x, "channel_sum");
  const int channels = x.shape()[0], height = x.shape()[1], width = x.shape()[2];
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out({channels});
  for (int c = 0; c < channels; ++c) {
    double total = 0.0;
    const float* p = x.value().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) total += p[i];
    out[c] = static_cast<float>(total);
  }
  return make_result(std::move(out), {x}, [height, width](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{broadcast_channel(g, height, width)};
  });
}

Var broadcast_channel(const Var& v, int height, int width) {
  if (v.shape().size() != 1) throw InvalidInput("broadcast_channel: expected {C}");
  const int channels = v.shape()[0];
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out({channels, height, width});
  for (int c = 0; c < channels; ++c) std::fill_n(out.data() + c * plane, plane, v.value()[c]);
  return make_result(std::move(out), {v}, [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{channel_sum(g)}; });
}

Var sum_channels(const Var& x) {
  require_rank3(x, "sum_channels");
  const int channels = x.shape()[0], height = x.shape()[1], width = x.shape()[2];
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out({1, height, width});
  for (int c = 0; c < channels; ++c) {
    const float* p = x.value().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] += p[i];
  }
  return make_result(std::move(out), {x}, [channels](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{repeat_channels(g, channels)};
  });
}

Var repeat_channels(const Var& x, int channels) {
  require_rank3(x, "repeat_channels");
  if (x.shape()[0] != 1) throw InvalidInput("repeat_channels: expected a single channel");
  const int height = x.shape()[1], width = x.shape()[2];
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out({channels, height, width});
  for (int c = 0; c < channels; ++c) std::copy_n(x.value().data(), plane, out.data() + c * plane);
  return make_result(std::move(out), {x}, [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sum_channels(g)}; });
}

namespace {

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> inv_std;
  // Multiplies (x - mean) to give the standardized value; 0 for flat channels.
  std::vector<double> xh_scale;
};

using ConstVec = Eigen::Map<const Eigen::ArrayXf>;
using Vec = Eigen::Map<Eigen::ArrayXf>;

// A channel whose spread is at float rounding level (relative to the largest
// magnitude in the tensor, which sets the GEMM rounding scale) is treated as
// exactly constant. Otherwise rounding differences between positions would be
// amplified by up to 1/sqrt(eps) at every normalised layer.
constexpr double kFlatSpread = 16.0 * std::numeric_limits<float>::epsilon();

ChannelStats channel_stats(const Tensor& x, float eps) {
  const int channels = x.dim(0);
  const Eigen::Index plane = static_cast<Eigen::Index>(x.dim(1)) * x.dim(2);
  ChannelStats st{std::vector<double>(channels), std::vector<double>(channels), std::vector<double>(channels)};
  const double scale = ConstVec(x.data(), static_cast<Eigen::Index>(x.size())).abs().maxCoeff();
  for (int c = 0; c < channels; ++c) {
    const ConstVec p(x.data() + c * plane, plane);
    const double mean = p.cast<double>().mean();
    const double spread = static_cast<double>(p.maxCoeff()) - p.minCoeff();
    const bool flat = spread <= kFlatSpread * scale;
    const double var = flat ? 0.0 : (p.cast<double>() - mean).square().mean();
    st.mean[c] = mean;
    st.inv_std[c] = 1.0 / std::sqrt(var + eps);
    st.xh_scale[c] = flat ? 0.0 : st.inv_std[c];
  }
  return st;
}

// inv * (v - mean(v) - xhat * mean(v * xhat)), per channel.
void standardize_vjp(const float* v, const float* x, double mean, double inv, double xh_scale, std::size_t n,
                     float* out) {
  const Eigen::Index len = static_cast<Eigen::Index>(n);
  const ConstVec pv(v, len), px(x, len);
  const Eigen::ArrayXd xh = (px.cast<double>() - mean) * xh_scale;
  const Eigen::ArrayXd vd = pv.cast<double>();
  const double mv = vd.mean(), mvx = (vd * xh).mean();
  Vec(out, len) = (inv * (vd - mv - xh * mvx)).cast<float>();
}

void require_channel_vector(const Var& x, const Var& v, const char* op) {
  require_rank3(x, op);
  if (v.shape().size() != 1 || v.shape()[0] != x.shape()[0]) {
    throw InvalidInput(std::string(op) + ": expected a {" + std::to_string(x.shape()[0]) + "} vector, got " +
                       shape_string(v.shape()));
  }
}

}  // namespace

Var add_channel(const Var& x, const Var& v) {
  require_channel_vector(x, v, "add_channel");
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor out(x.shape());
  for (int c = 0; c < x.shape()[0]; ++c) {
    const float* p = x.value().data() + c * plane;
    float* o = out.data() + c * plane;
    const float b = v.value()[c];
    for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] + b;
  }
  return make_result(std::move(out), {x, v}, [](const Var& g, const std::vector<bool>& needed) {
    std::vector<Var> r(2);
    r[0] = g;
    if (needed[1]) r[1] = channel_sum(g);
    return r;
  });
}

Var scale_channel(const Var& x, const Var& v) {
  require_channel_vector(x, v, "scale_channel");
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor out(x.shape());
  for (int c = 0; c < x.shape()[0]; ++c) {
    const float* p = x.value().data() + c * plane;
    float* o = out.data() + c * plane;
    const float s = v.value()[c];
    for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] * s;
  }
  return make_result(std::move(out), {x, v}, [x, v](const Var& g, const std::vector<bool>& needed) {
    std::vector<Var> r(2);
    if (needed[0]) r[0] = scale_channel(g, v);
    if (needed[1]) r[1] = channel_dot(g, x);
    return r;
  });
}

Var channel_dot(const Var& a, const Var& b) {
  require_same_shape(a, b, "channel_dot");
  require_rank3(a, "channel_dot");
  const int channels = a.shape()[0];
  const std::size_t plane = static_cast<std::size_t>(a.shape()[1]) * a.shape()[2];
  Tensor out({channels});
  for (int c = 0; c < channels; ++c) {
    const float* pa = a.value().data() + c * plane;
    const float* pb = b.value().data() + c * plane;
    double total = 0.0;
    for (std::size_t i = 0; i < plane; ++i) total += static_cast<double>(pa[i]) * pb[i];
    out[c] = static_cast<float>(total);
  }
  return make_result(std::move(out), {a, b}, [a, b](const Var& g, const std::vector<bool>& needed) {
    std::vector<Var> r(2);
    if (needed[0]) r[0] = scale_channel(b, g);
    if (needed[1]) r[1] = scale_channel(a, g);
    return r;
  });
}

Var standardize(const Var& x, float eps) {
  require_rank3(x, "standardize");
  const ChannelStats st = channel_stats(x.value(), eps);
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor out(x.shape());
  for (int c = 0; c < x.shape()[0]; ++c) {
    const float* p = x.value().data() + c * plane;
    float* o = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) o[i] = static_cast<float>((p[i] - st.mean[c]) * st.xh_scale[c]);
  }
  return make_result(std::move(out), {x}, [x, eps](const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{standardize_backward(g, x, eps)};
  });
}

Var standardize_backward(const Var& g, const Var& x, float eps) {
  require_same_shape(g, x, "standardize_backward");
  const ChannelStats st = channel_stats(x.value(), eps);
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor out(x.shape());
  for (int c = 0; c < x.shape()[0]; ++c) {
    standardize_vjp(g.value().data() + c * plane, x.value().data() + c * plane, st.mean[c], st.inv_std[c], st.xh_scale[c], plane,
                    out.data() + c * plane);
  }
  return make_result(std::move(out), {g, x}, [g, x, eps](const Var& u, const std::vector<bool>& needed) {
    std::vector<Var> r(2);
    // The map g -> J g is symmetric, so its adjoint is itself.
    if (needed[0]) r[0] = standardize_backward(u, x, eps);
    if (needed[1]) {
      if (GradMode::enabled()) throw InvalidInput("standardize: third-order derivatives are not supported");
      // With s = inv_std, xh = standardized x, m = mean(g xh), mu = mean(u xh),
      // A = mean(u g) - mean(u) mean(g):
      // d<u, J g>/dx = -s J(g mu + u m) - s^2 xh (A - m mu).
      const ChannelStats st = channel_stats(x.value(), eps);
      const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
      Tensor gx(x.shape());
      std::vector<float> mix(plane);
      for (int c = 0; c < x.shape()[0]; ++c) {
        const float* pg = g.value().data() + c * plane;
        const float* pu = u.value().data() + c * plane;
        const float* px = x.value().data() + c * plane;
        const double mean = st.mean[c], s = st.inv_std[c], xs = st.xh_scale[c];
        double sum_g = 0, sum_u = 0, sum_ug = 0, sum_gx = 0, sum_ux = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = (px[i] - mean) * xs;
          sum_g += pg[i];
          sum_u += pu[i];
          sum_ug += static_cast<double>(pu[i]) * pg[i];
          sum_gx += pg[i] * xh;
          sum_ux += pu[i] * xh;
        }
        const double n = static_cast<double>(plane);
        const double m = sum_gx / n, mu = sum_ux / n;
        const double a = sum_ug / n - (sum_u / n) * (sum_g / n);
        for (std::size_t i = 0; i < plane; ++i) mix[i] = static_cast<float>(pg[i] * mu + pu[i] * m);
        float* o = gx.data() + c * plane;
        standardize_vjp(mix.data(), px, mean, s, xs, plane, o);
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = (px[i] - mean) * xs;
          o[i] = static_cast<float>(-s * o[i] - s * s * xh * (a - m * mu));
        }
      }
      r[1] = Var::constant(std::move(gx));
    }
    return r;
  });
}

Var pad(const Var& x, int p) {
  require_rank3(x, "pad");
  if (p < 0) throw InvalidInput("pad: negative amount");
  const int channels = x.shape()[0], height = x.shape()[1], width = x.shape()[2];
  Tensor out({channels, height + 2 * p, width + 2 * p});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      std::copy_n(x.value().data() + (static_cast<std::size_t>(c) * height + y) * width, width, &out.at(c, y + p, p));
  return make_result(std::move(out), {x}, [p](const Var& g, const std::vector<bool>&) { return std::vector<Var>{crop(g, p)}; });
}

Var crop(const Var& x, int p) {
  require_rank3(x, "crop");
  const int channels = x.shape()[0], height = x.shape()[1] - 2 * p, width = x.shape()[2] - 2 * p;
  if (p < 0 || height < 1 || width < 1) throw InvalidInput("crop: amount too large");
  Tensor out({channels, height, width});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      std::copy_n(x.value().data() + (static_cast<std::size_t>(c) * (height + 2 * p) + y + p) * (width + 2 * p) + p, width,
                  &out.at(c, y, 0));
  return make_result(std::move(out), {x}, [p](const Var& g, const std::vector<bool>&) { return std::vector<Var>{pad(g, p)}; });
}

Var conv2d(const Var& x, const Var& w) {
  require_rank3(x, "conv2d");
  if (w.shape().size() != 4 || w.shape()[1] != x.shape()[0] || w.shape()[2] != w.shape()[3]) {
    throw InvalidInput("conv2d: weight " + shape_string(w.shape()) + " incompatible with input " +
                       shape_string(x.shape()));
  }
  const int k = w.shape()[2];
  const int height = x.shape()[1], width = x.shape()[2];
  if (height < k || width < k) throw InvalidInput("conv2d: input smaller than kernel");
  return make_result(conv_forward(x.value(), w.value()), {x, w},
                     [x, w, k, height, width](const Var& g, const std::vector<bool>& needed) {
                       std::vector<Var> out(2);
                       if (needed[0]) out[0] = conv2d_input_grad(g, w, height, width);
                       if (needed[1]) out[1] = conv2d_weight_grad(x, g, k);
                       return out;
                     });
}

Var conv2d(const Var& x, const Var& w, const Var& bias) { return add_channel(conv2d(x, w), bias); }

Var conv2d_input_grad(const Var& g, const Var& w, int height, int width) {
  const int k = w.shape()[2];
  return make_result(conv_input_adjoint(g.value(), w.value(), height, width), {g, w}, [g, w, k](const Var& gg, const std::vector<bool>& needed) {
    std::vector<Var> out(2);
    if (needed[0]) out[0] = conv2d(gg, w);
    if (needed[1]) out[1] = conv2d_weight_grad(gg, g, k);
    return out;
  });
}

Var conv2d_weight_grad(const Var& x, const Var& g, int k) {
  const int height = x.shape()[1], width = x.shape()[2];
  return make_result(conv_weight_adjoint(x.value(), g.value(), k), {x, g}, [x, g, height, width](const Var& gw, const std::vector<bool>& needed) {
    std::vector<Var> out(2);
    if (needed[0]) out[0] = conv2d_input_grad(g, gw, height, width);
    if (needed[1]) out[1] = conv2d(x, gw);
    return out;
  });
}

}  // namespace sgdeblur::ag
