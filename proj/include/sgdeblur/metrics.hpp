#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sgdeblur/imaging.hpp"

namespace sgdeblur {

inline constexpr double kPsnrCapDb = 100.0;

/// PSNR in dB on [0, 1]-mapped samples with peak 1; identical images give kPsnrCapDb.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over an 11x11 Gaussian window (sigma 1.5, valid positions only),
/// K1 = 0.01, K2 = 0.03, dynamic range 1 on [0, 1]-mapped samples, averaged over channels.
double ssim(const Image& a, const Image& b);

struct ImagePair {
  std::string id;
  std::filesystem::path restored;
  std::filesystem::path reference;
};

struct MetricEntry {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct SkippedEntry {
  std::string id;
  std::string reason;
};

struct MetricReport {
  std::vector<MetricEntry> per_image;  // sorted by id
  std::vector<SkippedEntry> skipped;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;

  int count() const { return static_cast<int>(per_image.size()); }
  bool partial() const { return !skipped.empty(); }
};

/// Aggregates entries (sorted by id first, so the means do not depend on input order).
MetricReport summarize(std::vector<MetricEntry> entries, std::vector<SkippedEntry> skipped = {});

/// Pairs that fail to load or differ in size are recorded as skipped.
MetricReport evaluate_pairs(const std::vector<ImagePair>& pairs);

void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
void write_report_json(const MetricReport& report, const std::filesystem::path& path);

}  // namespace sgdeblur
