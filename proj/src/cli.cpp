#include "sgdeblur/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "sgdeblur/blur_sim.hpp"
#include "sgdeblur/config.hpp"
#include "sgdeblur/error.hpp"
#include "sgdeblur/inference.hpp"
#include "sgdeblur/metrics.hpp"
#include "sgdeblur/training.hpp"

namespace sgdeblur {

namespace {

namespace fs = std::filesystem;

constexpr const char* kResolvedConfig = "resolved_config.txt";
constexpr const char* kTrainLog = "train_log.csv";

const std::string& require_key(const std::string& value, const char* key) {
  if (value.empty()) throw InvalidInput(std::string("config key '") + key + "' is required for this command");
  return value;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

void ensure_parent(const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string());
}

// Image outputs get the resolved config beside them.
void save_output_image(const RunConfig& cfg, const Image& img) {
  const fs::path out = require_key(cfg.output, "output");
  ensure_parent(out);
  save_image(img, out);
  write_text(fs::path(out.string() + ".config.txt"), render_config(cfg));
}

Checkpoint load_required_checkpoint(const RunConfig& cfg) {
  const fs::path dir = require_key(cfg.checkpoint_dir, "checkpoint_dir");
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory does not exist: " + dir.string());
  return load_checkpoint(dir);
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path image_path = require_key(cfg.train_image, "train_image");
  const fs::path dir = !cfg.checkpoint_dir.empty() ? fs::path(cfg.checkpoint_dir) : fs::path(require_key(cfg.output, "checkpoint_dir"));
  if (!fs::exists(image_path)) throw IoError("training image not found: " + image_path.string());
  const Image img = load_image(image_path);
  const ImagePyramid pyramid = build_pyramid(img, cfg.pyramid);

  out << "pyramid: " << pyramid.num_scales() << " levels";
  for (const Dims& d : pyramid.dims()) out << ' ' << d.height << 'x' << d.width;
  out << '\n';

  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  std::vector<LossRecord> log;
  TrainHooks hooks;
  hooks.on_iteration = [&log](const LossRecord& r) { log.push_back(r); };
  hooks.on_scale_complete = [&out, &log](int scale, const Checkpoint& ck) {
    const LossRecord& last = log.back();
    out << "scale " << scale << " done: sigma=" << ck.noise.sigma[scale] << " d_loss=" << last.d_loss
        << " g_adv=" << last.g_adv << " g_rec=" << last.g_rec << '\n';
  };

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create checkpoint directory " + dir.string());
  write_text(dir / kResolvedConfig, render_config(cfg));

  try {
    const Checkpoint ck = train_all_scales(pyramid, train, cfg.pyramid.min_size, hooks);
    write_loss_csv(log, dir / kTrainLog);
    save_checkpoint(ck, dir);
  } catch (const DivergenceError& e) {
    write_loss_csv(log, dir / kTrainLog);
    err << "training diverged: " << e.what() << '\n';
    return kExitRuntime;
  }
  out << "checkpoint written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_deblur(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  const Image blurry = load_image(require_key(cfg.input, "input"));
  DeblurSpec spec = cfg.deblur;
  spec.seed = cfg.seed;
  Image restored;
  try {
    restored = deblur(ck, blurry, spec);
  } catch (const InadmissibleIterations& e) {
    err << e.what() << "\nretry with --k_iterations " << e.max_k() << '\n';
    return kExitRuntime;
  }
  save_output_image(cfg, restored);
  out << "deblurred with k = " << spec.k_iterations << ", output " << restored.height() << 'x' << restored.width()
      << " -> " << cfg.output << '\n';
  return kExitOk;
}

MotionKernel kernel_from_config(const RunConfig& cfg) {
  int size = cfg.blur_kernel_size;
  if (size == 0) {
    size = static_cast<int>(std::ceil(cfg.blur_length));
    if (size % 2 == 0) ++size;
  }
  if (cfg.blur_kernel == "trajectory") return random_trajectory_kernel(cfg.seed, size, cfg.blur_steps, cfg.blur_jitter);
  return linear_motion_kernel(cfg.blur_length, cfg.blur_angle, size);
}

int cmd_simulate_blur(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Image sharp = load_image(require_key(cfg.input, "input"));
  BlurSpec spec{kernel_from_config(cfg), cfg.blur_noise_sigma, cfg.seed};
  const Image blurry = apply_blur(sharp, spec);
  save_output_image(cfg, blurry);
  write_text(fs::path(cfg.output + ".kernel.txt"), kernel_to_text(spec.kernel));
  out << "blurred with " << spec.kernel.size << 'x' << spec.kernel.size << ' ' << cfg.blur_kernel << " kernel -> "
      << cfg.output << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  DatasetIndex index;
  if (!cfg.restored_dir.empty() || !cfg.reference_dir.empty()) {
    index = match_by_filename(require_key(cfg.restored_dir, "restored_dir"), require_key(cfg.reference_dir, "reference_dir"));
  } else {
    index = discover_dataset(require_key(cfg.dataset_root, "dataset_root"));
  }
  for (const fs::path& p : index.unmatched) err << "warning: no counterpart for " << p.string() << '\n';

  std::vector<ImagePair> pairs;
  for (const auto& p : index.pairs) pairs.push_back({p.first.filename().string(), p.first, p.second});
  const MetricReport report = evaluate_pairs(pairs);

  const fs::path dir = require_key(cfg.output, "output");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());
  write_report_csv(report, dir / "report.csv");
  write_report_json(report, dir / "report.json");
  write_text(dir / kResolvedConfig, render_config(cfg));

  out << "evaluated " << report.count() << " pairs: mean PSNR " << report.mean_psnr_db << " dB, mean SSIM "
      << report.mean_ssim << '\n';
  if (report.partial()) out << "partial evaluation: " << report.skipped.size() << " pairs skipped\n";
  out << "report: " << (dir / "report.csv").string() << ' ' << (dir / "report.json").string() << '\n';
  return kExitOk;
}

int cmd_reconstruct(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  const Image img = reconstruct(ck);
  save_output_image(cfg, img);
  out << "reconstruction " << img.height() << 'x' << img.width() << " -> " << cfg.output << '\n';
  return kExitOk;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  const Image img = generate_sample(ck, cfg.start_scale, cfg.seed);
  save_output_image(cfg, img);
  out << "sample from level " << cfg.start_scale << " (seed " << cfg.seed << ") -> " << cfg.output << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image multi-scale GAN training and blind motion deblurring"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "key = value config file");

  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const std::string& key : config_keys()) {
    const std::string names = key == "output" ? "--out,--output" : "--" + key;
    flag_options[key] = app.add_option(names, flag_values[key], "overrides config key '" + key + "' (env " +
                                                                    env_var_for(key) + ")");
  }

  using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"train", "train all pyramid levels on one sharp image", cmd_train},
      {"deblur", "restore a blurry image with the finest-level generator", cmd_deblur},
      {"simulate-blur", "synthesise a motion-blurred observation", cmd_simulate_blur},
      {"evaluate", "PSNR/SSIM over matched image pairs", cmd_evaluate},
      {"reconstruct", "regenerate the training image from the reconstruction noise", cmd_reconstruct},
      {"sample", "draw a random sample from the cascade", cmd_sample},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    apply_environment(cfg);
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) set_config_value(cfg, key, flag_values[key]);
    }
    validate(cfg);

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, out, err);
    }
    err << "no command given\n";
    return kExitInput;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DecodeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IncompatibleCheckpoint& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace sgdeblur
