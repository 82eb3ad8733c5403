#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdeblur/imaging.hpp"

namespace sgdeblur {

/// Normalised, odd-sized point-spread function; weights are row-major size x size.
struct MotionKernel {
  int size = 1;
  std::vector<double> weights{1.0};

  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * size + x]; }
  int radius() const { return size / 2; }
  double sum() const;
  int nonzero_taps() const;
  MotionKernel transposed() const;
};

struct BlurSpec {
  MotionKernel kernel;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

MotionKernel delta_kernel(int size = 1);

/// Centred line segment of `length_px` at `angle_deg` (counter-clockwise from
/// +x, image y pointing down). Each tap holds the length of segment passing
/// through that pixel, then the kernel is normalised.
MotionKernel linear_motion_kernel(double length_px, double angle_deg, int size);

/// Seeded 2-D random walk of `steps` points with Gaussian heading jitter,
/// centred and scaled to fit the support, rasterised like the linear kernel.
MotionKernel random_trajectory_kernel(std::uint64_t seed, int size, int steps, double jitter);

/// I_blur = k * I_sharp + N with reflect padding, then clipped to [-1, 1].
Image apply_blur(const Image& img, const BlurSpec& spec);

/// One row per line, space separated.
std::string kernel_to_text(const MotionKernel& k);
MotionKernel kernel_from_text(const std::string& text);

}  // namespace sgdeblur
