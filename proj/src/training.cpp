#include "sgdeblur/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamZStar = 2;
constexpr std::uint64_t kStreamTrain = 3;

bool finite(double v) { return std::isfinite(v); }

// Warm start is possible when both levels use the same hidden width.
bool can_warm_start(const TrainConfig& config, int scale, int coarsest) {
  return config.warm_start && scale < coarsest &&
         channels_for_scale(config.network, scale) == channels_for_scale(config.network, scale + 1);
}

ScaleModel make_scale_model(const Checkpoint& ck, const TrainConfig& config, int scale) {
  ScaleModel model;
  if (can_warm_start(config, scale, ck.coarsest())) {
    model.generator = ck.scales[scale + 1].generator.clone();
    model.discriminator = ck.scales[scale + 1].discriminator.clone();
    model.generator.scale_index = scale;
    model.discriminator.scale_index = scale;
  } else {
    model.generator = init_generator(config.network, scale, derive_seed(config.seed, kStreamInit, 2 * scale));
    model.discriminator =
        init_discriminator(config.network, scale, derive_seed(config.seed, kStreamInit, 2 * scale + 1));
  }
  return model;
}

// Fresh noise at every level above `scale`, each at its scheduled amplitude.
std::vector<NoiseMap> random_noise_above(const Checkpoint& ck, int scale, std::mt19937_64& rng) {
  std::vector<NoiseMap> noise(ck.num_scales());
  for (int s = ck.coarsest(); s > scale; --s) noise[s] = gaussian_noise(ck.level_dims[s], ck.noise.sigma[s], rng);
  return noise;
}

void train_scale(Checkpoint& ck, const Image& real_image, int scale, const TrainConfig& config,
                 const TrainHooks& hooks) {
  const Dims dims = ck.level_dims[scale];

  std::vector<NoiseMap> rec_noise(ck.num_scales());
  for (int s = ck.coarsest(); s >= scale; --s) rec_noise[s] = reconstruction_noise(ck, s);
  const Image rec_prev_up = upsampled_input(ck, rec_noise, scale);
  const double sigma =
      scale == ck.coarsest() ? 1.0 : noise_amplitude(rec_prev_up, real_image, config.noise_base);
  ck.noise.sigma[scale] = sigma;

  ScaleModel model = make_scale_model(ck, config, scale);
  const std::vector<ag::Var> g_params = model.generator.body.parameters();
  const std::vector<ag::Var> d_params = model.discriminator.body.parameters();
  Adam opt_g(g_params, config.learning_rate, config.adam_beta1, config.adam_beta2);
  Adam opt_d(d_params, config.learning_rate, config.adam_beta1, config.adam_beta2);
  const Critic critic = as_critic(model.discriminator);

  std::mt19937_64 rng(derive_seed(config.seed, kStreamTrain, scale));
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  const ag::Var real = ag::Var::constant(real_image.tensor());
  const ag::Var rec_in = ag::Var::constant(rec_prev_up.tensor());
  const ag::Var z_rec = ag::Var::constant(rec_noise[scale].data);

  const int decay_iter = static_cast<int>(std::floor(config.lr_decay_at * config.iters_per_scale));

  auto sample_input = [&]() {
    const std::vector<NoiseMap> noise = random_noise_above(ck, scale, rng);
    return upsampled_input(ck, noise, scale);
  };

  for (int it = 0; it < config.iters_per_scale; ++it) {
    if (it == decay_iter) {
      opt_g.set_learning_rate(config.learning_rate * config.lr_decay_factor);
      opt_d.set_learning_rate(config.learning_rate * config.lr_decay_factor);
    }
    LossRecord rec;
    rec.iteration = it;
    rec.scale = scale;
    rec.sigma = sigma;
    rec.alpha = config.rec_weight_alpha;

    for (int step = 0; step < config.d_steps; ++step) {
      const Image prev_up = sample_input();
      const NoiseMap z = gaussian_noise(dims, sigma, rng);
      const Image fake = generator_forward(model.generator, z, prev_up);
      const CriticLossTerms terms =
          critic_loss(critic, real_image.tensor(), fake.tensor(), config.gp_weight_lambda, uniform(rng));
      rec.d_loss = terms.total.value().item();
      if (!finite(rec.d_loss)) throw DivergenceError(scale, it, "critic loss");
      opt_d.step(ag::grad(terms.total, d_params));
    }

    for (int step = 0; step < config.g_steps; ++step) {
      const Image prev_up = sample_input();
      const NoiseMap z = gaussian_noise(dims, sigma, rng);
      const ag::Var fake =
          generator_forward(model.generator, ag::Var::constant(z.data), ag::Var::constant(prev_up.tensor()));
      const ag::Var rec_out = generator_forward(model.generator, z_rec, rec_in);
      const GeneratorLossTerms terms = generator_loss(critic, fake, rec_out, real, config.rec_weight_alpha);
      rec.g_adv = terms.adversarial;
      rec.g_rec = terms.reconstruction;
      if (!finite(terms.total_value())) throw DivergenceError(scale, it, "generator loss");
      opt_g.step(ag::grad(terms.total, g_params));
    }

    if (hooks.on_iteration) hooks.on_iteration(rec);
  }

  ck.scales[scale] = std::move(model);
}

}  // namespace

void validate(const TrainConfig& config) {
  if (config.iters_per_scale < 1 || config.d_steps < 1 || config.g_steps < 1) {
    throw InvalidInput("iters_per_scale, d_steps and g_steps must be >= 1");
  }
  if (!(config.learning_rate > 0.0)) throw InvalidInput("learning_rate must be > 0");
  if (!(config.adam_beta1 >= 0.0 && config.adam_beta1 < 1.0 && config.adam_beta2 >= 0.0 && config.adam_beta2 < 1.0)) {
    throw InvalidInput("adam betas must lie in [0, 1)");
  }
  if (!(config.rec_weight_alpha >= 0.0) || !(config.gp_weight_lambda >= 0.0) || !(config.noise_base >= 0.0)) {
    throw InvalidInput("loss weights and noise_base must be >= 0");
  }
  if (!(config.lr_decay_at >= 0.0 && config.lr_decay_at <= 1.0) || !(config.lr_decay_factor > 0.0)) {
    throw InvalidInput("lr_decay_at must lie in [0, 1] and lr_decay_factor must be > 0");
  }
  validate(config.network);
}

void Checkpoint::require_complete() const {
  if (format_version != kFormatVersion) throw IncompatibleCheckpoint("unsupported checkpoint format version");
  if (level_dims.empty() || scales.size() != level_dims.size() || noise.sigma.size() != level_dims.size()) {
    throw InvalidInput("checkpoint is incomplete: level metadata and models disagree");
  }
  for (const ScaleModel& m : scales) {
    if (m.generator.body.blocks().empty()) throw InvalidInput("checkpoint is incomplete: untrained level");
  }
  const Dims coarse = level_dims.back();
  if (z_star.data.rank() != 3 || z_star.height() != coarse.height || z_star.width() != coarse.width) {
    throw InvalidInput("checkpoint reconstruction noise does not match the coarsest level");
  }
}

double noise_amplitude(const Image& rec_prev_up, const Image& x_n, double noise_base) {
  return noise_base * rmse(rec_prev_up, x_n);
}

NoiseMap reconstruction_noise(const Checkpoint& ck, int scale) {
  if (scale == ck.coarsest()) return ck.z_star;
  return zero_noise(ck.level_dims.at(scale));
}

Image run_cascade(const Checkpoint& ck, const std::vector<NoiseMap>& noise, int stop_scale) {
  if (stop_scale < 0 || stop_scale > ck.coarsest()) throw InvalidInput("cascade stop level out of range");
  Image out;
  for (int s = ck.coarsest(); s >= stop_scale; --s) {
    const Dims d = ck.level_dims[s];
    const Image up = s == ck.coarsest() ? Image(d.height, d.width) : resample(out, d.height, d.width);
    out = generator_forward(ck.scales[s].generator, noise.at(s), up);
  }
  return out;
}

Image upsampled_input(const Checkpoint& ck, const std::vector<NoiseMap>& noise, int scale) {
  const Dims d = ck.level_dims.at(scale);
  if (scale == ck.coarsest()) return Image(d.height, d.width);
  return resample(run_cascade(ck, noise, scale + 1), d.height, d.width);
}

Checkpoint train_all_scales(const ImagePyramid& pyramid, const TrainConfig& config, int min_size,
                            const TrainHooks& hooks) {
  validate(config);
  if (pyramid.levels.empty()) throw InvalidInput("empty pyramid");
  Checkpoint ck;
  ck.level_dims = pyramid.dims();
  ck.scale_factor = pyramid.scale_factor;
  ck.min_size = min_size;
  ck.config = config;
  ck.scales.resize(pyramid.levels.size());
  ck.noise.sigma.assign(pyramid.levels.size(), 0.0);

  const int critic_min = min_discriminator_input(config.network);
  const Dims coarse = ck.level_dims.back();
  if (std::min(coarse.height, coarse.width) < critic_min) {
    throw InvalidInput("coarsest level is smaller than the critic's " + std::to_string(critic_min) +
                       "px receptive field");
  }

  std::mt19937_64 zrng(derive_seed(config.seed, kStreamZStar));
  ck.z_star = gaussian_noise(coarse, 1.0, zrng);

  for (int n = ck.coarsest(); n >= 0; --n) {
    train_scale(ck, pyramid.levels[n], n, config, hooks);
    if (hooks.on_scale_complete) hooks.on_scale_complete(n, ck);
  }
  return ck;
}

void write_loss_csv(const std::vector<LossRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,scale,d_loss,g_adv,g_rec,sigma\n" << std::setprecision(9);
  for (const LossRecord& r : log) {
    out << r.iteration << ',' << r.scale << ',' << r.d_loss << ',' << r.g_adv << ',' << r.g_rec << ',' << r.sigma
        << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

Adam::Adam(std::vector<ag::Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const ag::Var& p : params_) {
    m_.emplace_back(p.value().size(), 0.0);
    v_.emplace_back(p.value().size(), 0.0);
  }
}

void Adam::step(const std::vector<ag::Var>& grads) {
  if (grads.size() != params_.size()) throw InvalidInput("Adam::step: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].mutable_value();
    const Tensor& g = grads[i].value();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] = static_cast<float>(p[j] - lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_));
    }
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

}  // namespace sgdeblur
