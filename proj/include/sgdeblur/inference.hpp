#pragma once

#include <cstdint>

#include "sgdeblur/error.hpp"
#include "sgdeblur/imaging.hpp"
#include "sgdeblur/training.hpp"

namespace sgdeblur {

struct DeblurSpec {
  int k_iterations = 3;
  /// Multiplies sigma_0 for the noise injected at each refinement; 0 is deterministic.
  double inference_noise_scale = 0.0;
  bool output_match_input_dims = true;
  std::uint64_t seed = 0;
};

/// The requested refinement count would shrink the input below the finest generator's minimum size.
class InadmissibleIterations : public InvalidInput {
 public:
  InadmissibleIterations(const std::string& what, int max_k) : InvalidInput(what), max_k_(max_k) {}
  int max_k() const { return max_k_; }

 private:
  int max_k_;
};

/// Largest k for which the input shrunk by r^k stays at least the checkpoint's min_size.
int max_admissible_k(const Checkpoint& ck, Dims input);

/// Shrinks the blurry image by r^k, then k times: upsample by 1/r and refine
/// with the finest-level generator. Output has the input's dims.
Image deblur(const Checkpoint& ck, const Image& blurry, const DeblurSpec& spec);

/// Full cascade: levels above `start_scale` use reconstruction noise, levels
/// at or below it draw fresh noise at their scheduled amplitude.
Image generate_sample(const Checkpoint& ck, int start_scale, std::uint64_t seed);

/// Cascade with noise (z*, 0, ..., 0).
Image reconstruct(const Checkpoint& ck);

}  // namespace sgdeblur
