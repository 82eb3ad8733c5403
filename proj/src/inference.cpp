#include "sgdeblur/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

int max_admissible_k(const Checkpoint& ck, Dims input) {
  const int shortest = std::min(input.height, input.width);
  if (shortest < ck.min_size) return -1;
  int k = 0;
  while (k < 64 && std::lround(shortest * std::pow(ck.scale_factor, k + 1)) >= ck.min_size) ++k;
  return k;
}

Image deblur(const Checkpoint& ck, const Image& blurry, const DeblurSpec& spec) {
  ck.require_complete();
  if (spec.k_iterations < 0) throw InvalidInput("k_iterations must be >= 0");
  if (!(spec.inference_noise_scale >= 0.0)) throw InvalidInput("inference_noise_scale must be >= 0");
  const Dims input{blurry.height(), blurry.width()};
  const int k = spec.k_iterations;
  if (k > 0) {
    const int max_k = max_admissible_k(ck, input);
    if (k > max_k) {
      throw InadmissibleIterations("k = " + std::to_string(k) + " shrinks the " + std::to_string(input.height) + "x" +
                         std::to_string(input.width) + " input below the generator's minimum size " +
                         std::to_string(ck.min_size) + "; max admissible k is " + std::to_string(std::max(max_k, 0)),
                                   std::max(max_k, 0));
    }
  }

  const ScaleGenerator& finest = ck.scales.front().generator;
  const double sigma = spec.inference_noise_scale * ck.noise.sigma.front();
  std::mt19937_64 rng(spec.seed);

  // Sizes are derived from the input dims at every pass so rounding does not compound.
  Dims d = scaled_dims(input, ck.scale_factor, k);
  Image y = resample(blurry, d.height, d.width);
  for (int pass = k - 1; pass >= 0; --pass) {
    d = scaled_dims(input, ck.scale_factor, pass);
    const Image up = resample(y, d.height, d.width);
    const NoiseMap z = sigma > 0.0 ? gaussian_noise(d, sigma, rng) : zero_noise(d);
    y = generator_forward(finest, z, up);
  }
  if (spec.output_match_input_dims && !y.same_dims(blurry)) y = resample(y, input.height, input.width);
  y.clip();
  return y;
}

Image generate_sample(const Checkpoint& ck, int start_scale, std::uint64_t seed) {
  ck.require_complete();
  if (start_scale < 0 || start_scale > ck.coarsest()) {
    throw InvalidInput("start_scale " + std::to_string(start_scale) + " outside [0, " +
                       std::to_string(ck.coarsest()) + "]");
  }
  std::mt19937_64 rng(seed);
  std::vector<NoiseMap> noise(ck.num_scales());
  for (int s = ck.coarsest(); s >= 0; --s) {
    noise[s] = s > start_scale ? reconstruction_noise(ck, s) : gaussian_noise(ck.level_dims[s], ck.noise.sigma[s], rng);
  }
  return run_cascade(ck, noise, 0);
}

Image reconstruct(const Checkpoint& ck) {
  ck.require_complete();
  std::vector<NoiseMap> noise(ck.num_scales());
  for (int s = 0; s < ck.num_scales(); ++s) noise[s] = reconstruction_noise(ck, s);
  return run_cascade(ck, noise, 0);
}

}  // namespace sgdeblur
