#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sgdeblur/error.hpp"
#include "sgdeblur/training.hpp"

namespace sgdeblur {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr char kBlobMagic[8] = {'S', 'G', 'D', 'B', 'L', 'O', 'B', '1'};
constexpr const char* kMetaFile = "meta.json";

std::string blob_name(int scale) { return "scale_" + std::to_string(scale) + ".bin"; }

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const fs::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated parameter blob " + path.string());
  return v;
}

void write_blob(const fs::path& path, const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kBlobMagic, sizeof(kBlobMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (int d : t->shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::map<std::string, Tensor> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing parameter blob " + path.string());
  char magic[sizeof(kBlobMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBlobMagic, sizeof(magic)) != 0) {
    throw IncompatibleCheckpoint("not a parameter blob: " + path.string());
  }
  std::map<std::string, Tensor> out;
  const auto count = take<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(take<std::uint32_t>(in, path), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    Shape shape(take<std::uint32_t>(in, path));
    for (int& d : shape) d = take<std::int32_t>(in, path);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw IoError("truncated parameter blob " + path.string());
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

json network_to_json(const NetworkConfig& n) {
  return {{"num_blocks", n.num_blocks},       {"base_channels", n.base_channels}, {"kernel_size", n.kernel_size},
          {"min_channels", n.min_channels},   {"max_channels", n.max_channels},   {"normalize", n.normalize},
          {"leaky_slope", n.leaky_slope}};
}

NetworkConfig network_from_json(const json& j) {
  NetworkConfig n;
  n.num_blocks = j.at("num_blocks");
  n.base_channels = j.at("base_channels");
  n.kernel_size = j.at("kernel_size");
  n.min_channels = j.at("min_channels");
  n.max_channels = j.at("max_channels");
  n.normalize = j.at("normalize");
  n.leaky_slope = j.at("leaky_slope");
  return n;
}

json train_to_json(const TrainConfig& c) {
  return {{"iters_per_scale", c.iters_per_scale},
          {"d_steps", c.d_steps},
          {"g_steps", c.g_steps},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"rec_weight_alpha", c.rec_weight_alpha},
          {"gp_weight_lambda", c.gp_weight_lambda},
          {"lr_decay_at", c.lr_decay_at},
          {"lr_decay_factor", c.lr_decay_factor},
          {"noise_base", c.noise_base},
          {"warm_start", c.warm_start},
          {"seed", c.seed},
          {"network", network_to_json(c.network)}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.iters_per_scale = j.at("iters_per_scale");
  c.d_steps = j.at("d_steps");
  c.g_steps = j.at("g_steps");
  c.learning_rate = j.at("learning_rate");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.rec_weight_alpha = j.at("rec_weight_alpha");
  c.gp_weight_lambda = j.at("gp_weight_lambda");
  c.lr_decay_at = j.at("lr_decay_at");
  c.lr_decay_factor = j.at("lr_decay_factor");
  c.noise_base = j.at("noise_base");
  c.warm_start = j.at("warm_start");
  c.seed = j.at("seed");
  c.network = network_from_json(j.at("network"));
  return c;
}

void fill_stack(ConvStack& stack, const std::string& prefix, const std::map<std::string, Tensor>& blob,
                const fs::path& path) {
  for (auto& [name, var] : stack.named_parameters()) {
    auto it = blob.find(prefix + name);
    if (it == blob.end()) throw IncompatibleCheckpoint("parameter " + prefix + name + " missing from " + path.string());
    if (it->second.shape() != var.shape()) {
      throw IncompatibleCheckpoint("parameter " + prefix + name + " has shape " + shape_string(it->second.shape()) +
                                   ", expected " + shape_string(var.shape()));
    }
    ag::Var handle = var;
    handle.assign(it->second);
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& dir) {
  ck.require_complete();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create checkpoint directory " + dir.string());

  json dims = json::array();
  for (const Dims& d : ck.level_dims) dims.push_back({d.height, d.width});
  const json meta = {{"format_version", ck.format_version},
                     {"num_scales", ck.num_scales()},
                     {"scale_factor", ck.scale_factor},
                     {"min_size", ck.min_size},
                     {"level_dims", dims},
                     {"sigma", ck.noise.sigma},
                     {"train_config", train_to_json(ck.config)}};
  {
    std::ofstream out(dir / kMetaFile);
    if (!out) throw IoError("cannot write " + (dir / kMetaFile).string());
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("short write to " + (dir / kMetaFile).string());
  }

  for (int n = 0; n < ck.num_scales(); ++n) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    const ScaleModel& m = ck.scales[n];
    for (const auto& [name, v] : m.generator.body.named_parameters()) tensors.emplace_back("generator." + name, &v.value());
    for (const auto& [name, v] : m.discriminator.body.named_parameters())
      tensors.emplace_back("discriminator." + name, &v.value());
    if (n == ck.coarsest()) tensors.emplace_back("z_star", &ck.z_star.data);
    write_blob(dir / blob_name(n), tensors);
  }
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path meta_path = dir / kMetaFile;
  std::ifstream in(meta_path);
  if (!in) throw IoError("missing checkpoint metadata " + meta_path.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw IncompatibleCheckpoint("malformed checkpoint metadata " + meta_path.string() + ": " + e.what());
  }

  Checkpoint ck;
  try {
    const int version = meta.at("format_version");
    if (version != Checkpoint::kFormatVersion) {
      throw IncompatibleCheckpoint("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    ck.format_version = version;
    ck.scale_factor = meta.at("scale_factor");
    ck.min_size = meta.at("min_size");
    for (const json& d : meta.at("level_dims")) ck.level_dims.push_back({d.at(0), d.at(1)});
    ck.noise.sigma = meta.at("sigma").get<std::vector<double>>();
    ck.config = train_from_json(meta.at("train_config"));
    if (static_cast<int>(ck.level_dims.size()) != meta.at("num_scales").get<int>()) {
      throw IncompatibleCheckpoint("num_scales disagrees with level_dims in " + meta_path.string());
    }
  } catch (const json::exception& e) {
    throw IncompatibleCheckpoint("malformed checkpoint metadata " + meta_path.string() + ": " + e.what());
  }

  ck.scales.resize(ck.level_dims.size());
  for (int n = 0; n < ck.num_scales(); ++n) {
    const fs::path path = dir / blob_name(n);
    const auto blob = read_blob(path);
    ScaleModel& m = ck.scales[n];
    m.generator = init_generator(ck.config.network, n, 0);
    m.discriminator = init_discriminator(ck.config.network, n, 0);
    fill_stack(m.generator.body, "generator.", blob, path);
    fill_stack(m.discriminator.body, "discriminator.", blob, path);
    if (n == ck.coarsest()) {
      auto it = blob.find("z_star");
      if (it == blob.end()) throw IncompatibleCheckpoint("z_star missing from " + path.string());
      ck.z_star = {it->second, 1.0};
    }
  }
  ck.require_complete();
  return ck;
}

double max_parameter_difference(const Checkpoint& a, const Checkpoint& b) {
  if (a.num_scales() != b.num_scales() || a.scales.size() != b.scales.size()) {
    throw InvalidInput("checkpoints have different numbers of levels");
  }
  double worst = 0.0;
  auto compare = [&worst](const Tensor& x, const Tensor& y) {
    if (x.shape() != y.shape()) throw InvalidInput("checkpoint tensors differ in shape");
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(static_cast<double>(x[i]) - y[i]));
  };
  for (std::size_t n = 0; n < a.scales.size(); ++n) {
    const auto ga = a.scales[n].generator.body.parameters(), gb = b.scales[n].generator.body.parameters();
    const auto da = a.scales[n].discriminator.body.parameters(), db = b.scales[n].discriminator.body.parameters();
    if (ga.size() != gb.size() || da.size() != db.size()) throw InvalidInput("checkpoint architectures differ");
    for (std::size_t i = 0; i < ga.size(); ++i) compare(ga[i].value(), gb[i].value());
    for (std::size_t i = 0; i < da.size(); ++i) compare(da[i].value(), db[i].value());
  }
  compare(a.z_star.data, b.z_star.data);
  for (std::size_t n = 0; n < a.noise.sigma.size() && n < b.noise.sigma.size(); ++n) {
    worst = std::max(worst, std::abs(a.noise.sigma[n] - b.noise.sigma[n]));
  }
  return worst;
}

}  // namespace sgdeblur
