#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sgdeblur/autograd.hpp"
#include "sgdeblur/imaging.hpp"

namespace sgdeblur {

struct NetworkConfig {
  int num_blocks = 5;
  int base_channels = 32;
  int kernel_size = 3;
  int min_channels = 32;
  int max_channels = 128;
  /// Per-channel normalisation after every hidden convolution.
  bool normalize = true;
  float leaky_slope = 0.2f;
};

void validate(const NetworkConfig& config);

/// Hidden width at pyramid level n: base * 2^(n / 4), clamped to [min, max].
int channels_for_scale(const NetworkConfig& config, int scale_index);

/// conv -> [normalisation -> leaky rectifier]; the final block is conv only.
struct ConvBlock {
  ag::Var weight;  // {out, in, k, k}
  ag::Var bias;    // {out}
  ag::Var gamma;   // {out}, undefined when the block has no normalisation
  ag::Var beta;
};

class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(const NetworkConfig& config, int hidden, int out_channels, std::mt19937_64& rng);

  /// Hidden blocks apply normalisation + leaky rectifier; the last block is a bare conv.
  ag::Var forward(const ag::Var& x) const;

  std::vector<std::pair<std::string, ag::Var>> named_parameters() const;
  std::vector<ag::Var> parameters() const;
  std::size_t parameter_count() const;
  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  std::vector<ConvBlock>& blocks() { return blocks_; }
  const NetworkConfig& config() const { return config_; }

  /// Deep copy with fresh parameter storage.
  ConvStack clone() const;

 private:
  NetworkConfig config_;
  std::vector<ConvBlock> blocks_;
};

/// Residual generator G_n: prev_up + tanh(body(pad(z + prev_up))).
struct ScaleGenerator {
  int scale_index = 0;
  ConvStack body;

  ScaleGenerator clone() const { return {scale_index, body.clone()}; }
};

/// Markovian patch critic D_n; unpadded, so each score sees a (2B+1)^2 patch.
struct ScaleDiscriminator {
  int scale_index = 0;
  ConvStack body;

  ScaleDiscriminator clone() const { return {scale_index, body.clone()}; }
};

/// Noise image z_n; `data` already includes the amplitude.
struct NoiseMap {
  Tensor data;
  double amplitude_sigma = 0.0;

  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
};

NoiseMap zero_noise(Dims dims);
NoiseMap gaussian_noise(Dims dims, double sigma, std::mt19937_64& rng);

ScaleGenerator init_generator(const NetworkConfig& config, int scale_index, std::uint64_t seed);
ScaleDiscriminator init_discriminator(const NetworkConfig& config, int scale_index, std::uint64_t seed);

ag::Var generator_forward(const ScaleGenerator& g, const ag::Var& z, const ag::Var& prev_up);
Image generator_forward(const ScaleGenerator& g, const NoiseMap& z, const Image& prev_up);

/// Score map {1, H - 2B, W - 2B}.
ag::Var discriminator_forward(const ScaleDiscriminator& d, const ag::Var& img);
Tensor discriminator_forward(const ScaleDiscriminator& d, const Image& img);

/// Smallest image side the critic accepts.
int min_discriminator_input(const NetworkConfig& config);

}  // namespace sgdeblur
