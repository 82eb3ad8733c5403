#include "sgdeblur/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_dims(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw InvalidInput("metric inputs differ in size");
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    taps[i] = std::exp(-x * x / (2.0 * kWindowSigma * kWindowSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Separable valid-mode Gaussian filter of a height x width plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int height, int width,
                                 const std::array<double, kWindow>& taps) {
  const int out_h = height - kWindow + 1, out_w = width - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(height) * out_w);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += taps[t] * plane[static_cast<std::size_t>(y) * width + x + t];
      rows[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += taps[t] * rows[static_cast<std::size_t>(y + t) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_dims(a, b);
  const auto sa = a.samples();
  const auto sb = b.samples();
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = (static_cast<double>(sa[i]) - sb[i]) / 2.0;
    total += d * d;
  }
  const double mse = total / static_cast<double>(sa.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_dims(a, b);
  const int height = a.height(), width = a.width();
  if (std::min(height, width) < kWindow) throw InvalidInput("SSIM needs images at least 11x11");
  const auto taps = gaussian_taps();
  const std::size_t plane = static_cast<std::size_t>(height) * width;

  double channel_total = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> pa(plane), pb(plane), aa(plane), bb(plane), ab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = (a.samples()[c * plane + i] + 1.0) / 2.0;
      pb[i] = (b.samples()[c * plane + i] + 1.0) / 2.0;
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, height, width, taps);
    const auto mu_b = filter_valid(pb, height, width, taps);
    const auto e_aa = filter_valid(aa, height, width, taps);
    const auto e_bb = filter_valid(bb, height, width, taps);
    const auto e_ab = filter_valid(ab, height, width, taps);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      total += ((2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (var_a + var_b + kC2));
    }
    channel_total += total / static_cast<double>(mu_a.size());
  }
  return std::clamp(channel_total / Image::kChannels, -1.0, 1.0);
}

MetricReport summarize(std::vector<MetricEntry> entries, std::vector<SkippedEntry> skipped) {
  auto by_id = [](const auto& x, const auto& y) { return x.id < y.id; };
  std::sort(entries.begin(), entries.end(), by_id);
  std::sort(skipped.begin(), skipped.end(), by_id);
  MetricReport report;
  report.per_image = std::move(entries);
  report.skipped = std::move(skipped);
  if (!report.per_image.empty()) {
    double p = 0.0, s = 0.0;
    for (const MetricEntry& e : report.per_image) {
      p += e.psnr_db;
      s += e.ssim;
    }
    report.mean_psnr_db = p / report.count();
    report.mean_ssim = s / report.count();
  }
  return report;
}

MetricReport evaluate_pairs(const std::vector<ImagePair>& pairs) {
  std::vector<MetricEntry> entries;
  std::vector<SkippedEntry> skipped;
  for (const ImagePair& pair : pairs) {
    try {
      const Image restored = load_image(pair.restored);
      const Image reference = load_image(pair.reference);
      if (!restored.same_dims(reference)) {
        skipped.push_back({pair.id, "dimension mismatch"});
        continue;
      }
      entries.push_back({pair.id, psnr(restored, reference), ssim(restored, reference)});
    } catch (const std::exception& e) {
      skipped.push_back({pair.id, e.what()});
    }
  }
  return summarize(std::move(entries), std::move(skipped));
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,psnr_db,ssim\n" << std::setprecision(10);
  for (const MetricEntry& e : report.per_image) out << e.id << ',' << e.psnr_db << ',' << e.ssim << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

void write_report_json(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::json skipped = nlohmann::json::array();
  for (const SkippedEntry& s : report.skipped) skipped.push_back({{"id", s.id}, {"reason", s.reason}});
  const nlohmann::json j = {{"count", report.count()},
                            {"mean_psnr_db", report.mean_psnr_db},
                            {"mean_ssim", report.mean_ssim},
                            {"partial", report.partial()},
                            {"skipped", skipped}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace sgdeblur
