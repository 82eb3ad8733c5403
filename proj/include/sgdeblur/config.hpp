#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgdeblur/imaging.hpp"
#include "sgdeblur/inference.hpp"
#include "sgdeblur/training.hpp"

namespace sgdeblur {

/// Every tunable of a run. Each field is addressable by a flat key (see config_keys()).
struct RunConfig {
  TrainConfig train;
  PyramidOptions pyramid;
  DeblurSpec deblur;
  std::uint64_t seed = 0;

  std::string train_image;
  std::string input;
  std::string output;
  std::string checkpoint_dir;
  std::string restored_dir;
  std::string reference_dir;
  std::string dataset_root;

  // simulate-blur
  std::string blur_kernel = "linear";  // linear | trajectory
  double blur_length = 5.0;
  double blur_angle = 0.0;
  int blur_kernel_size = 0;  // 0: smallest odd size that fits the motion
  int blur_steps = 30;
  double blur_jitter = 0.5;
  double blur_noise_sigma = 0.0;

  // sample
  int start_scale = 0;
};

/// Environment variables are this prefix plus the upper-cased key.
inline constexpr const char* kEnvPrefix = "SGDEBLUR_";

std::vector<std::string> config_keys();
std::string env_var_for(const std::string& key);

/// Throws InvalidInput for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// `key = value` lines; `#` starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_environment(RunConfig& cfg);

/// Every key with its resolved value, in config_keys() order.
std::string render_config(const RunConfig& cfg);

/// Range checks for every section; paths are checked by the commands that use them.
void validate(const RunConfig& cfg);

/// Files matched by identical filename across two directories, in lexicographic order.
struct DatasetIndex {
  struct Pair {
    std::filesystem::path first;
    std::filesystem::path second;
  };
  std::vector<Pair> pairs;
  std::vector<std::filesystem::path> unmatched;
};

DatasetIndex match_by_filename(const std::filesystem::path& first_dir, const std::filesystem::path& second_dir);

/// GoPro-style root with `blur/` and `sharp/` subdirectories.
DatasetIndex discover_dataset(const std::filesystem::path& root);

}  // namespace sgdeblur
