#include "sgdeblur/blur_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

void require_odd(int size) {
  if (size < 1 || size % 2 == 0) throw InvalidInput("kernel size must be odd and positive, got " + std::to_string(size));
}

struct Point {
  double x;
  double y;
};

// Length of segment a->b inside the unit pixel centred at (cx, cy) (Liang-Barsky).
double segment_in_pixel(Point a, Point b, double cx, double cy) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - (cx - 0.5), (cx + 0.5) - a.x, a.y - (cy - 0.5), (cy + 0.5) - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return 0.0;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 >= t1) return 0.0;
  }
  return (t1 - t0) * std::hypot(dx, dy);
}

// Deposits a polyline given in kernel-centred coordinates.
void rasterize(const std::vector<Point>& path, MotionKernel& k) {
  const int r = k.radius();
  std::fill(k.weights.begin(), k.weights.end(), 0.0);
  bool any_segment = false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point a = path[i - 1], b = path[i];
    if (a.x == b.x && a.y == b.y) continue;
    any_segment = true;
    const int x0 = std::max(-r, static_cast<int>(std::floor(std::min(a.x, b.x))) - 1);
    const int x1 = std::min(r, static_cast<int>(std::ceil(std::max(a.x, b.x))) + 1);
    const int y0 = std::max(-r, static_cast<int>(std::floor(std::min(a.y, b.y))) - 1);
    const int y1 = std::min(r, static_cast<int>(std::ceil(std::max(a.y, b.y))) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        k.weights[static_cast<std::size_t>(y + r) * k.size + (x + r)] += segment_in_pixel(a, b, x, y);
  }
  if (!any_segment) {
    // Single point: bilinear splat.
    const Point p = path.empty() ? Point{0.0, 0.0} : path.front();
    const double fx = std::floor(p.x), fy = std::floor(p.y);
    const double ax = p.x - fx, ay = p.y - fy;
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        const int x = static_cast<int>(fx) + dx, y = static_cast<int>(fy) + dy;
        const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
        if (w > 0.0 && std::abs(x) <= r && std::abs(y) <= r)
          k.weights[static_cast<std::size_t>(y + r) * k.size + (x + r)] += w;
      }
    }
  }
  double total = 0.0;
  for (double w : k.weights) total += w;
  if (total <= 0.0) throw InvalidInput("motion path falls outside the kernel support");
  for (double& w : k.weights) w /= total;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

double MotionKernel::sum() const {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

int MotionKernel::nonzero_taps() const {
  return static_cast<int>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
}

MotionKernel MotionKernel::transposed() const {
  MotionKernel t = *this;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) t.weights[static_cast<std::size_t>(x) * size + y] = at(y, x);
  return t;
}

MotionKernel delta_kernel(int size) {
  require_odd(size);
  MotionKernel k;
  k.size = size;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  k.weights[static_cast<std::size_t>(k.radius()) * size + k.radius()] = 1.0;
  return k;
}

MotionKernel linear_motion_kernel(double length_px, double angle_deg, int size) {
  require_odd(size);
  if (!(length_px >= 1.0)) throw InvalidInput("motion length must be >= 1 px");
  if (length_px > size) throw InvalidInput("motion length exceeds kernel size");
  const double theta = angle_deg * std::numbers::pi / 180.0;
  // Snap directions that are axis aligned up to rounding noise.
  double ux = std::cos(theta), uy = -std::sin(theta);
  if (std::abs(ux) < 1e-12) ux = 0.0;
  if (std::abs(uy) < 1e-12) uy = 0.0;
  const double half = length_px / 2.0;
  MotionKernel k = delta_kernel(size);
  rasterize({{-half * ux, -half * uy}, {half * ux, half * uy}}, k);
  return k;
}

MotionKernel random_trajectory_kernel(std::uint64_t seed, int size, int steps, double jitter) {
  require_odd(size);
  if (steps < 1) throw InvalidInput("trajectory needs at least one step");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Point> path{{0.0, 0.0}};
  double heading = uniform(rng);
  for (int i = 1; i < steps; ++i) {
    heading += jitter * normal(rng);
    const Point last = path.back();
    path.push_back({last.x + std::cos(heading), last.y + std::sin(heading)});
  }
  double min_x = path[0].x, max_x = path[0].x, min_y = path[0].y, max_y = path[0].y;
  for (const Point& p : path) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);
  const double extent = std::max(max_x - min_x, max_y - min_y);
  const double limit = static_cast<double>(size - 1);
  const double fit = extent > limit ? limit / extent : 1.0;
  for (Point& p : path) p = {(p.x - cx) * fit, (p.y - cy) * fit};

  MotionKernel k = delta_kernel(size);
  rasterize(path, k);
  return k;
}

Image apply_blur(const Image& img, const BlurSpec& spec) {
  const MotionKernel& k = spec.kernel;
  require_odd(k.size);
  if (k.weights.size() != static_cast<std::size_t>(k.size) * k.size) throw InvalidInput("kernel weight count mismatch");
  if (k.size > img.height() || k.size > img.width()) throw InvalidInput("blur kernel is larger than the image");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidInput("noise_sigma must be >= 0");

  const int height = img.height(), width = img.width(), r = k.radius();
  Image out(height, width);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < k.size; ++i) {
          const int sy = reflect(y - (i - r), height);
          for (int j = 0; j < k.size; ++j) {
            const double w = k.at(i, j);
            if (w != 0.0) acc += w * img.at(c, sy, reflect(x - (j - r), width));
          }
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.noise_sigma);
    for (float& s : out.samples()) s = static_cast<float>(s + normal(rng));
  }
  out.clip();
  return out;
}

std::string kernel_to_text(const MotionKernel& k) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int y = 0; y < k.size; ++y) {
    for (int x = 0; x < k.size; ++x) {
      if (x) os << ' ';
      os << k.at(y, x);
    }
    os << '\n';
  }
  return os.str();
}

MotionKernel kernel_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v;
    int cols = 0;
    while (ls >> v) {
      values.push_back(v);
      ++cols;
    }
    if (!ls.eof()) throw InvalidInput("kernel text: malformed number on row " + std::to_string(rows + 1));
    ++rows;
    if (cols != 0 && static_cast<std::size_t>(rows) * cols != values.size()) {
      throw InvalidInput("kernel text: ragged rows");
    }
  }
  if (rows == 0 || values.size() != static_cast<std::size_t>(rows) * rows) throw InvalidInput("kernel text must be square");
  require_odd(rows);
  MotionKernel k;
  k.size = rows;
  k.weights = std::move(values);
  return k;
}

}  // namespace sgdeblur
