#pragma once

// Slow, direct implementations used to cross-check the library.

#include <cmath>
#include <vector>

#include "sgdeblur/blur_sim.hpp"
#include "sgdeblur/imaging.hpp"

namespace sgdeblur::testing {

inline double to_unit(float s) { return (static_cast<double>(s) + 1.0) / 2.0; }

inline double psnr_oracle(const Image& a, const Image& b) {
  long double se = 0.0L;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        const long double d = to_unit(a.at(c, y, x)) - to_unit(b.at(c, y, x));
        se += d * d;
      }
    }
  }
  const long double mse = se / (3.0L * a.height() * a.width());
  if (mse == 0.0L) return 100.0;
  return std::min(100.0, static_cast<double>(10.0L * std::log10(1.0L / mse)));
}

// Every 11x11 window computed from scratch with a 2-D Gaussian.
inline double ssim_oracle(const Image& a, const Image& b) {
  constexpr int n = 11;
  double w[n][n];
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      wsum += w[i][j];
    }
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + n <= a.height(); ++y) {
      for (int x = 0; x + n <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            ma += w[i][j] / wsum * to_unit(a.at(c, y + i, x + j));
            mb += w[i][j] / wsum * to_unit(b.at(c, y + i, x + j));
          }
        }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double da = to_unit(a.at(c, y + i, x + j)) - ma;
            const double db = to_unit(b.at(c, y + i, x + j)) - mb;
            va += w[i][j] / wsum * da * da;
            vb += w[i][j] / wsum * db * db;
            cov += w[i][j] / wsum * da * db;
          }
        }
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

inline int mirror_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// out(y, x) = sum_{i, j} k(i, j) * img(y - (i - r), x - (j - r)), mirrored at the borders, unclipped.
inline Image convolve_oracle(const Image& img, const MotionKernel& k) {
  const int r = k.size / 2;
  Image out(img.height(), img.width());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int i = 0; i < k.size; ++i) {
          for (int j = 0; j < k.size; ++j) {
            acc += k.at(i, j) * img.at(c, mirror_index(y - (i - r), img.height()), mirror_index(x - (j - r), img.width()));
          }
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

inline std::vector<int> pyramid_sides_oracle(int side, double r, int min_size, int max_levels) {
  std::vector<int> sides;
  for (int n = 0; n < max_levels; ++n) {
    const int s = static_cast<int>(std::floor(side * std::pow(r, n) + 0.5));
    if (s < min_size) break;
    sides.push_back(s);
  }
  return sides;
}

}  // namespace sgdeblur::testing
