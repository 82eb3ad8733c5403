#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "sgdeblur/imaging.hpp"
#include "sgdeblur/losses.hpp"
#include "sgdeblur/networks.hpp"

namespace sgdeblur {

struct TrainConfig {
  int iters_per_scale = 2000;
  int d_steps = 3;
  int g_steps = 3;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double rec_weight_alpha = 10.0;
  double gp_weight_lambda = 0.1;
  /// Learning rate is multiplied by lr_decay_factor once lr_decay_at * iters_per_scale iterations have run.
  double lr_decay_at = 0.8;
  double lr_decay_factor = 0.1;
  double noise_base = 0.1;
  /// Start scale n from scale n+1's weights when the shapes agree.
  bool warm_start = true;
  std::uint64_t seed = 0;
  NetworkConfig network;
};

void validate(const TrainConfig& config);

/// Noise amplitude per pyramid level, indexed by n (0 = finest).
struct NoiseSchedule {
  std::vector<double> sigma;
};

struct ScaleModel {
  ScaleGenerator generator;
  ScaleDiscriminator discriminator;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  /// Indexed by pyramid level n.
  std::vector<ScaleModel> scales;
  NoiseMap z_star;
  NoiseSchedule noise;
  std::vector<Dims> level_dims;
  double scale_factor = 0.75;
  int min_size = 25;
  TrainConfig config;
  int format_version = kFormatVersion;

  int num_scales() const { return static_cast<int>(level_dims.size()); }
  int coarsest() const { return num_scales() - 1; }
  /// Throws unless every level has a generator and the metadata is consistent.
  void require_complete() const;
};

/// One row of the training log.
struct LossRecord {
  int iteration = 0;
  int scale = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_rec = 0.0;
  double sigma = 0.0;
  double alpha = 0.0;

  double g_total() const { return g_adv + alpha * g_rec; }
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_iteration;
  /// Called after each level finishes, with levels >= scale trained.
  std::function<void(int scale, const Checkpoint&)> on_scale_complete;
};

/// sigma_n = noise_base * RMSE(upsampled reconstruction, x_n).
double noise_amplitude(const Image& rec_prev_up, const Image& x_n, double noise_base);

/// Reconstruction noise for level n: z* at the coarsest level, zeros elsewhere.
NoiseMap reconstruction_noise(const Checkpoint& ck, int scale);

/// Runs the generator cascade from the coarsest level down to `stop_scale`
/// with the given noise per level (indexed by n; only n >= stop_scale is read).
Image run_cascade(const Checkpoint& ck, const std::vector<NoiseMap>& noise, int stop_scale);

/// Input image for level n's generator: zeros at the coarsest level,
/// otherwise the level n+1 output resampled to level n's dims.
Image upsampled_input(const Checkpoint& ck, const std::vector<NoiseMap>& noise, int scale);

Checkpoint train_all_scales(const ImagePyramid& pyramid, const TrainConfig& config, int min_size,
                            const TrainHooks& hooks = {});

void write_loss_csv(const std::vector<LossRecord>& log, const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Largest absolute parameter difference; throws if the structures differ.
double max_parameter_difference(const Checkpoint& a, const Checkpoint& b);

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ag::Var> params, double lr, double beta1, double beta2, double eps = 1e-8);

  void step(const std::vector<ag::Var>& grads);
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Mixes a base seed with stream identifiers (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace sgdeblur
