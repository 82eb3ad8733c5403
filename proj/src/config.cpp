#include "sgdeblur/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  std::from_chars_result res{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for doubles is not available on every toolchain we target.
    char* end = nullptr;
    value = static_cast<T>(std::strtod(text.c_str(), &end));
    res.ptr = end;
    res.ec = (end == first) ? std::errc::invalid_argument : std::errc{};
  } else {
    res = std::from_chars(first, last, value);
  }
  if (text.empty() || res.ec != std::errc{} || res.ptr != last) {
    throw InvalidInput("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw InvalidInput("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SGD_INT(expr)                                                                                      \
  Field {                                                                                                  \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_number<int>(k, v); },    \
        [](const RunConfig& c) { return std::to_string(c.expr); }                                          \
  }
#define SGD_DOUBLE(expr)                                                                                    \
  Field {                                                                                                   \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_number<double>(k, v); },  \
        [](const RunConfig& c) { return fmt(c.expr); }                                                      \
  }
#define SGD_BOOL(expr)                                                                                      \
  Field {                                                                                                   \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_bool(k, v); },            \
        [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); }                           \
  }
#define SGD_STRING(expr)                                                                                    \
  Field {                                                                                                   \
    [](RunConfig& c, const std::string&, const std::string& v) { c.expr = v; },                             \
        [](const RunConfig& c) { return c.expr; }                                                           \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"iters_per_scale", SGD_INT(train.iters_per_scale)},
      {"d_steps", SGD_INT(train.d_steps)},
      {"g_steps", SGD_INT(train.g_steps)},
      {"learning_rate", SGD_DOUBLE(train.learning_rate)},
      {"adam_beta1", SGD_DOUBLE(train.adam_beta1)},
      {"adam_beta2", SGD_DOUBLE(train.adam_beta2)},
      {"rec_weight_alpha", SGD_DOUBLE(train.rec_weight_alpha)},
      {"gp_weight_lambda", SGD_DOUBLE(train.gp_weight_lambda)},
      {"lr_decay_at", SGD_DOUBLE(train.lr_decay_at)},
      {"lr_decay_factor", SGD_DOUBLE(train.lr_decay_factor)},
      {"noise_base", SGD_DOUBLE(train.noise_base)},
      {"warm_start", SGD_BOOL(train.warm_start)},
      {"num_blocks", SGD_INT(train.network.num_blocks)},
      {"base_channels", SGD_INT(train.network.base_channels)},
      {"min_channels", SGD_INT(train.network.min_channels)},
      {"max_channels", SGD_INT(train.network.max_channels)},
      {"normalize", SGD_BOOL(train.network.normalize)},
      {"scale_factor", SGD_DOUBLE(pyramid.scale_factor)},
      {"min_size", SGD_INT(pyramid.min_size)},
      {"max_size", SGD_INT(pyramid.max_size)},
      {"max_scales", SGD_INT(pyramid.max_scales)},
      {"k_iterations", SGD_INT(deblur.k_iterations)},
      {"inference_noise_scale", SGD_DOUBLE(deblur.inference_noise_scale)},
      {"output_match_input_dims", SGD_BOOL(deblur.output_match_input_dims)},
      {"train_image", SGD_STRING(train_image)},
      {"input", SGD_STRING(input)},
      {"output", SGD_STRING(output)},
      {"checkpoint_dir", SGD_STRING(checkpoint_dir)},
      {"restored_dir", SGD_STRING(restored_dir)},
      {"reference_dir", SGD_STRING(reference_dir)},
      {"dataset_root", SGD_STRING(dataset_root)},
      {"blur_kernel", SGD_STRING(blur_kernel)},
      {"blur_length", SGD_DOUBLE(blur_length)},
      {"blur_angle", SGD_DOUBLE(blur_angle)},
      {"blur_kernel_size", SGD_INT(blur_kernel_size)},
      {"blur_steps", SGD_INT(blur_steps)},
      {"blur_jitter", SGD_DOUBLE(blur_jitter)},
      {"blur_noise_sigma", SGD_DOUBLE(blur_noise_sigma)},
      {"start_scale", SGD_INT(start_scale)},
  };
  return table;
}

#undef SGD_INT
#undef SGD_DOUBLE
#undef SGD_BOOL
#undef SGD_STRING

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw InvalidInput("unknown config key '" + key + "'");
}

std::vector<fs::path> regular_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, f] : fields()) keys.push_back(name);
  return keys;
}

std::string env_var_for(const std::string& key) {
  std::string name = kEnvPrefix;
  for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return name;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, key, trim(value));
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(cfg, buffer.str());
}

void apply_environment(RunConfig& cfg) {
  for (const std::string& key : config_keys()) {
    if (const char* v = std::getenv(env_var_for(key).c_str())) set_config_value(cfg, key, v);
  }
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [name, f] : fields()) os << name << " = " << f.get(cfg) << '\n';
  return os.str();
}

void validate(const RunConfig& cfg) {
  validate(cfg.train);
  validate(cfg.pyramid);
  if (cfg.deblur.k_iterations < 0) throw InvalidInput("k_iterations must be >= 0");
  if (!(cfg.deblur.inference_noise_scale >= 0.0)) throw InvalidInput("inference_noise_scale must be >= 0");
  if (cfg.blur_kernel != "linear" && cfg.blur_kernel != "trajectory") {
    throw InvalidInput("blur_kernel must be 'linear' or 'trajectory'");
  }
  if (!(cfg.blur_noise_sigma >= 0.0)) throw InvalidInput("blur_noise_sigma must be >= 0");
  if (cfg.blur_kernel_size < 0) throw InvalidInput("blur_kernel_size must be >= 0");
}

DatasetIndex match_by_filename(const fs::path& first_dir, const fs::path& second_dir) {
  const auto first = regular_files(first_dir);
  const auto second = regular_files(second_dir);
  std::map<std::string, fs::path> by_name;
  for (const fs::path& p : second) by_name.emplace(p.filename().string(), p);

  DatasetIndex index;
  std::set<std::string> used;
  for (const fs::path& p : first) {
    auto it = by_name.find(p.filename().string());
    if (it == by_name.end()) {
      index.unmatched.push_back(p);
    } else {
      index.pairs.push_back({p, it->second});
      used.insert(it->first);
    }
  }
  for (const fs::path& p : second) {
    if (!used.count(p.filename().string())) index.unmatched.push_back(p);
  }
  return index;
}

DatasetIndex discover_dataset(const fs::path& root) { return match_by_filename(root / "blur", root / "sharp"); }

}  // namespace sgdeblur
