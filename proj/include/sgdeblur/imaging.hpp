#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sgdeblur/tensor.hpp"

namespace sgdeblur {

/// Three-channel planar image with samples nominally in [-1, 1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, float fill = 0.0f);
  /// Wraps a {3, H, W} tensor.
  explicit Image(Tensor planes);

  int height() const { return planes_.empty() ? 0 : planes_.dim(1); }
  int width() const { return planes_.empty() ? 0 : planes_.dim(2); }
  int channels() const { return kChannels; }
  std::size_t size() const { return planes_.size(); }

  float& at(int c, int y, int x) { return planes_.at(c, y, x); }
  float at(int c, int y, int x) const { return planes_.at(c, y, x); }
  std::span<float> samples() { return planes_.values(); }
  std::span<const float> samples() const { return planes_.values(); }

  const Tensor& tensor() const { return planes_; }
  Tensor& tensor() { return planes_; }

  bool same_dims(const Image& other) const { return height() == other.height() && width() == other.width(); }

  /// Clips every sample into [-1, 1] in place.
  void clip();

 private:
  Tensor planes_;
};

Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

/// Separable bicubic resampling (Keys, a = -0.5). When shrinking, the kernel is
/// stretched by the inverse scale so it also acts as an anti-alias prefilter.
/// Output is clipped to [-1, 1].
Image resample(const Image& img, int target_h, int target_w);

/// Nearest-neighbour resampling; baseline for comparisons only.
Image resample_nearest(const Image& img, int target_h, int target_w);

struct Dims {
  int height = 0;
  int width = 0;
  bool operator==(const Dims&) const = default;
};

/// round(dim * r^n) per axis.
Dims scaled_dims(Dims base, double r, int n);

struct PyramidOptions {
  double scale_factor = 0.75;
  int min_size = 25;
  int max_size = 250;
  int max_scales = 8;
};

/// Levels from finest (index 0) to coarsest (index N).
struct ImagePyramid {
  std::vector<Image> levels;
  double scale_factor = 0.75;

  int num_scales() const { return static_cast<int>(levels.size()); }
  int coarsest() const { return num_scales() - 1; }
  std::vector<Dims> dims() const;
};

/// Number of levels for a finest-level minimum dimension under `opts`.
int pyramid_depth(int min_dim0, const PyramidOptions& opts);

ImagePyramid build_pyramid(const Image& img, const PyramidOptions& opts);

void validate(const PyramidOptions& opts);

}  // namespace sgdeblur
