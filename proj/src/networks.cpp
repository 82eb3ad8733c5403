#include "sgdeblur/networks.hpp"

#include <algorithm>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

constexpr float kNormEpsilon = 1e-5f;

Tensor gaussian_tensor(Shape shape, float mean, float stddev, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(mean, stddev);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = normal(rng);
  return t;
}

// Normalises each channel by its own spatial mean and variance.
ag::Var channel_normalize(const ag::Var& x, const ag::Var& gamma, const ag::Var& beta) {
  return ag::add_channel(ag::scale_channel(ag::standardize(x, kNormEpsilon), gamma), beta);
}

ag::Var clone_var(const ag::Var& v) { return v.defined() ? ag::Var::parameter(v.value()) : ag::Var{}; }

void require_image_var(const ag::Var& v, const char* what) {
  if (v.shape().size() != 3 || v.shape()[0] != Image::kChannels) {
    throw InvalidInput(std::string(what) + " must be {3, H, W}, got " + shape_string(v.shape()));
  }
}

}  // namespace

void validate(const NetworkConfig& config) {
  if (config.num_blocks < 2) throw InvalidInput("num_blocks must be >= 2");
  if (config.base_channels < 1) throw InvalidInput("base_channels must be >= 1");
  if (config.kernel_size < 1 || config.kernel_size % 2 == 0) throw InvalidInput("kernel_size must be odd");
  if (config.min_channels < 1 || config.max_channels < config.min_channels) {
    throw InvalidInput("channel bounds must satisfy 1 <= min_channels <= max_channels");
  }
}

int channels_for_scale(const NetworkConfig& config, int scale_index) {
  const int group = std::max(0, scale_index) / 4;
  long width = config.base_channels;
  for (int i = 0; i < group && width < config.max_channels; ++i) width *= 2;
  return static_cast<int>(std::clamp<long>(width, std::min(config.min_channels, config.base_channels),
                                           config.max_channels));
}

ConvStack::ConvStack(const NetworkConfig& config, int hidden, int out_channels, std::mt19937_64& rng)
    : config_(config) {
  const int k = config.kernel_size;
  for (int b = 0; b < config.num_blocks; ++b) {
    const bool last = b + 1 == config.num_blocks;
    const int in = b == 0 ? Image::kChannels : hidden;
    const int out = last ? out_channels : hidden;
    ConvBlock block;
    block.weight = ag::Var::parameter(gaussian_tensor({out, in, k, k}, 0.0f, 0.02f, rng));
    block.bias = ag::Var::parameter(Tensor({out}));
    if (!last && config.normalize) {
      block.gamma = ag::Var::parameter(gaussian_tensor({out}, 1.0f, 0.02f, rng));
      block.beta = ag::Var::parameter(Tensor({out}));
    }
    blocks_.push_back(std::move(block));
  }
}

ag::Var ConvStack::forward(const ag::Var& x) const {
  ag::Var h = x;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const ConvBlock& block = blocks_[b];
    h = ag::conv2d(h, block.weight, block.bias);
    if (b + 1 == blocks_.size()) break;
    if (block.gamma.defined()) h = channel_normalize(h, block.gamma, block.beta);
    h = ag::leaky_relu(h, config_.leaky_slope);
  }
  return h;
}

std::vector<std::pair<std::string, ag::Var>> ConvStack::named_parameters() const {
  std::vector<std::pair<std::string, ag::Var>> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    const ConvBlock& block = blocks_[b];
    out.emplace_back(prefix + "weight", block.weight);
    out.emplace_back(prefix + "bias", block.bias);
    if (block.gamma.defined()) {
      out.emplace_back(prefix + "gamma", block.gamma);
      out.emplace_back(prefix + "beta", block.beta);
    }
  }
  return out;
}

std::vector<ag::Var> ConvStack::parameters() const {
  std::vector<ag::Var> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::size_t ConvStack::parameter_count() const {
  std::size_t n = 0;
  for (const ag::Var& v : parameters()) n += v.value().size();
  return n;
}

ConvStack ConvStack::clone() const {
  ConvStack copy;
  copy.config_ = config_;
  for (const ConvBlock& b : blocks_) {
    copy.blocks_.push_back({clone_var(b.weight), clone_var(b.bias), clone_var(b.gamma), clone_var(b.beta)});
  }
  return copy;
}

NoiseMap zero_noise(Dims dims) { return {Tensor({Image::kChannels, dims.height, dims.width}), 0.0}; }

NoiseMap gaussian_noise(Dims dims, double sigma, std::mt19937_64& rng) {
  NoiseMap z{gaussian_tensor({Image::kChannels, dims.height, dims.width}, 0.0f, 1.0f, rng), sigma};
  for (float& v : z.data.values()) v = static_cast<float>(v * sigma);
  return z;
}

ScaleGenerator init_generator(const NetworkConfig& config, int scale_index, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  return {scale_index, ConvStack(config, channels_for_scale(config, scale_index), Image::kChannels, rng)};
}

ScaleDiscriminator init_discriminator(const NetworkConfig& config, int scale_index, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  return {scale_index, ConvStack(config, channels_for_scale(config, scale_index), 1, rng)};
}

ag::Var generator_forward(const ScaleGenerator& g, const ag::Var& z, const ag::Var& prev_up) {
  require_image_var(z, "noise map");
  require_image_var(prev_up, "upsampled previous image");
  if (z.shape() != prev_up.shape()) {
    throw InvalidInput("noise " + shape_string(z.shape()) + " does not match image " + shape_string(prev_up.shape()));
  }
  const NetworkConfig& cfg = g.body.config();
  const int p = cfg.num_blocks * (cfg.kernel_size / 2);
  const ag::Var residual = ag::tanh(g.body.forward(ag::pad(ag::add(z, prev_up), p)));
  return ag::clamp(ag::add(prev_up, residual), -1.0f, 1.0f);
}

Image generator_forward(const ScaleGenerator& g, const NoiseMap& z, const Image& prev_up) {
  ag::NoGrad no_grad;
  return Image(generator_forward(g, ag::Var::constant(z.data), ag::Var::constant(prev_up.tensor())).value());
}

int min_discriminator_input(const NetworkConfig& config) { return config.num_blocks * (config.kernel_size - 1) + 1; }

ag::Var discriminator_forward(const ScaleDiscriminator& d, const ag::Var& img) {
  require_image_var(img, "critic input");
  const int min_side = min_discriminator_input(d.body.config());
  if (img.shape()[1] < min_side || img.shape()[2] < min_side) {
    throw InvalidInput("critic input " + shape_string(img.shape()) + " is smaller than its " +
                       std::to_string(min_side) + "px receptive field");
  }
  return d.body.forward(img);
}

Tensor discriminator_forward(const ScaleDiscriminator& d, const Image& img) {
  ag::NoGrad no_grad;
  return discriminator_forward(d, ag::Var::constant(img.tensor())).value();
}

}  // namespace sgdeblur
