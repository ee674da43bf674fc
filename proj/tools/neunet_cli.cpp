// neunet command-line driver.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "neunet/checkerboard.hpp"
#include "neunet/train.hpp"
#include "neunet/vol_io.hpp"
#include "neunet/wavelet.hpp"

namespace fs = std::filesystem;
using namespace neunet;

namespace {

enum Exit { kOk = 0, kFailure = 1, kArgument = 2, kIo = 3, kNumeric = 4 };

struct Globals {
  std::uint64_t seed = 0;
  int epochs = 1000;
  double lr = 0.01;
  int batch = 2;
  std::string patch = "32";
  std::string config;
  int workers = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* patch_opt = nullptr;
  CLI::Option* workers_opt = nullptr;

  // Config file first, explicit flags override.
  RunConfig run_config() const {
    RunConfig cfg;
    if (!config.empty()) cfg.apply(KeyValues::load(config));
    if (seed_opt->count()) cfg.seed = seed;
    if (epochs_opt->count()) cfg.epochs = epochs;
    if (lr_opt->count()) cfg.initial_lr = lr;
    if (batch_opt->count()) cfg.batch_size = batch;
    if (patch_opt->count()) cfg.patch_size = parse_index3(patch);
    if (workers_opt->count()) cfg.workers = workers;
    cfg.validate();
    return cfg;
  }
};

// Loads a dataset and brings it into network space when it is still raw.
Dataset prepared_dataset(const fs::path& dir) {
  auto loaded = load_dataset(dir);
  if (loaded.normalized) return loaded.dataset;
  const auto fp = loaded.has_fingerprint ? loaded.fingerprint : fingerprint(loaded.dataset);
  const auto spacing = target_spacing(fp);
  Dataset out{loaded.dataset.modality, loaded.dataset.num_classes, {}};
  for (const auto& c : loaded.dataset.cases) out.cases.push_back(prepare(c, fp, spacing));
  return out;
}

std::string band_path(const std::string& stem, int level, int band) {
  return stem + ".l" + std::to_string(level) + ".band" + std::to_string(band) + ".vol";
}

int cmd_phantoms(const fs::path& out, int n, const std::string& shape, int classes, std::uint64_t seed) {
  const auto ds = make_phantoms(n, parse_index3(shape), classes, seed);
  save_dataset(out, ds, fingerprint(ds), false);
  std::cout << "wrote " << n << " cases to " << out.string() << "\n";
  return kOk;
}

int cmd_preprocess(const fs::path& in, const fs::path& out, const std::string& modality) {
  auto loaded = load_dataset(in);
  if (!modality.empty()) loaded.dataset.modality = parse_modality(modality);
  if (loaded.normalized) throw ArgumentError(in.string() + " is already preprocessed");
  const auto fp = fingerprint(loaded.dataset);
  const auto spacing = target_spacing(fp);
  Dataset prepared{loaded.dataset.modality, loaded.dataset.num_classes, {}};
  for (const auto& c : loaded.dataset.cases) prepared.cases.push_back(prepare(c, fp, spacing));
  save_dataset(out, prepared, fp, true);
  std::cout << "target spacing " << to_string(spacing) << ", clip [" << fp.foreground_clip.first << ", "
            << fp.foreground_clip.second << "], foreground mean " << fp.foreground_mean << " std "
            << fp.foreground_std << "\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out, bool resume) {
  const auto all = prepared_dataset(data);
  const auto [train_set, val_set] = split_dataset(all, cfg);
  TrainOptions opt;
  opt.out_dir = out;
  opt.resume = resume;
  opt.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " lr " << std::setprecision(6) << r.lr << " loss " << r.loss;
    if (!r.val_dice.empty()) std::cout << " val_dice " << r.mean_val_dice();
    std::cout << std::endl;
  };
  const auto res = train(cfg, train_set, val_set, opt);
  std::cout << "best val dice " << res.best_score << " at epoch " << res.best_epoch << "\n";
  return kOk;
}

int cmd_eval(const fs::path& ckpt, const fs::path& data, const std::string& out, const std::string& patch_text,
             double overlap) {
  const auto ck = Checkpoint::load(ckpt);
  const auto net = ck.network();
  const Index3 patch = parse_index3(patch_text.empty() ? ck.meta.get_or("patch", "32") : patch_text);
  const auto rows = evaluate(net, prepared_dataset(data), patch, overlap);
  if (out.empty()) {
    write_metrics_csv(std::cout, rows);
  } else {
    std::ofstream os(out);
    if (!os) throw IoError("cannot open " + out + " for writing");
    write_metrics_csv(os, rows);
  }
  return kOk;
}

int cmd_dwt(const fs::path& in, const std::string& stem, const std::string& axes, int levels) {
  if (levels < 1) throw ArgumentError("levels must be >= 1");
  const auto a = parse_index3(axes);
  const AxisFlags flags{a[0] != 0, a[1] != 0, a[2] != 0};
  if (!flags[0] && !flags[1] && !flags[2]) throw ArgumentError("select at least one axis");
  auto current = load_image(in);
  for (int l = 1; l <= levels; ++l) {
    for (int ax = 0; ax < 3; ++ax) {
      if (flags[ax] && current.spatial()[ax] % 2 != 0) {
        throw ArgumentError("level " + std::to_string(l) + " extent " + to_string(current.spatial()) +
                            " is odd on a transformed axis");
      }
    }
    const auto s = dwt3d(current, flags);
    for (std::size_t b = 0; b < s.bands.size(); ++b) save_vol(band_path(stem, l, static_cast<int>(b)), s.bands[b]);
    current = s.approx();
  }
  KeyValues manifest;
  manifest.set("axes", a);
  manifest.set("levels", levels);
  manifest.save(stem + ".dwt.txt");
  return kOk;
}

int cmd_idwt(const std::string& stem, const fs::path& out) {
  const auto manifest = KeyValues::load(stem + ".dwt.txt");
  const auto a = manifest.get_index3("axes");
  const int levels = static_cast<int>(manifest.get_int("levels"));
  SubbandSet<float> s;
  s.axis_flags = {a[0] != 0, a[1] != 0, a[2] != 0};
  const int bands = 1 << s.transformed_axes();
  Volume4<float> approx = load_image(band_path(stem, levels, 0));
  for (int l = levels; l >= 1; --l) {
    s.bands.assign(1, approx);
    for (int b = 1; b < bands; ++b) s.bands.push_back(load_image(band_path(stem, l, b)));
    approx = idwt3d(s);
  }
  save_vol(out, approx);
  return kOk;
}

int cmd_checkerboard(std::uint64_t seed, int seeds, Index kernel, Index stride, const std::string& out) {
  if (seeds < 1) throw ArgumentError("seeds must be >= 1");
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw IoError("cannot open " + out + " for writing");
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "seed,method,phase_imbalance\n" << std::setprecision(10);
  for (int i = 0; i < seeds; ++i) {
    const auto t = checkerboard_trial(seed + static_cast<std::uint64_t>(i), kernel, stride);
    os << t.seed << ",transposed," << t.transposed << "\n";
    os << t.seed << ",subpixel," << t.subpixel << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neunet: wavelet-input, sub-pixel-decoder volumetric segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed");
  g.epochs_opt = app.add_option("--epochs", g.epochs, "Training epochs");
  g.lr_opt = app.add_option("--lr", g.lr, "Initial learning rate");
  g.batch_opt = app.add_option("--batch", g.batch, "Batch size");
  g.patch_opt = app.add_option("--patch", g.patch, "Patch size, e.g. 32 or 16,32,32");
  app.add_option("--config", g.config, "Key-value run configuration")->check(CLI::ExistingFile);
  g.workers_opt = app.add_option("--workers", g.workers, "Data loading workers");

  auto* phantoms = app.add_subcommand("phantoms", "Generate a synthetic phantom dataset");
  fs::path ph_out;
  int ph_n = 20, ph_classes = 3;
  std::string ph_shape = "32";
  phantoms->add_option("--out", ph_out, "Output dataset directory")->required();
  phantoms->add_option("--n", ph_n, "Number of cases");
  phantoms->add_option("--shape", ph_shape, "Volume extent");
  phantoms->add_option("--classes", ph_classes, "Classes including background");

  auto* preprocess = app.add_subcommand("preprocess", "Crop, resample and normalise a dataset");
  fs::path pp_in, pp_out;
  std::string pp_modality;
  preprocess->add_option("--in", pp_in, "Raw dataset directory")->required();
  preprocess->add_option("--out", pp_out, "Output dataset directory")->required();
  preprocess->add_option("--modality", pp_modality, "CT or MRI (overrides the dataset fingerprint)");

  auto* train_cmd = app.add_subcommand("train", "Train a network");
  fs::path tr_data, tr_out;
  bool tr_resume = false, tr_no_wavelet = false;
  int tr_val = -1;
  train_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr_out, "Run directory for checkpoints and logs")->required();
  train_cmd->add_flag("--resume", tr_resume, "Continue from <out>/latest.nvckpt");
  train_cmd->add_option("--val-cases", tr_val, "Cases held out for validation");
  train_cmd->add_flag("--no-wavelet", tr_no_wavelet, "Disable the wavelet input branch");

  auto* eval = app.add_subcommand("eval", "Write per-case metrics for a checkpoint");
  fs::path ev_ckpt, ev_data;
  std::string ev_out, ev_patch;
  double ev_overlap = 0.5;
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval->add_option("--data", ev_data, "Dataset directory")->required();
  eval->add_option("--out", ev_out, "Metrics CSV (default stdout)");
  eval->add_option("--window", ev_patch, "Sliding-window patch (default: training patch)");
  eval->add_option("--overlap", ev_overlap, "Sliding-window overlap");

  auto* dwt = app.add_subcommand("dwt", "Multi-level Haar analysis of a .vol image");
  fs::path dw_in;
  std::string dw_stem, dw_axes = "1";
  int dw_levels = 1;
  dwt->add_option("--in", dw_in, "Input image")->required();
  dwt->add_option("--out", dw_stem, "Output stem")->required();
  dwt->add_option("--axes", dw_axes, "Axis flags, e.g. 1,1,1 or 0,1,1");
  dwt->add_option("--levels", dw_levels, "Decomposition levels");

  auto* idwt = app.add_subcommand("idwt", "Reconstruct an image from band files");
  std::string iw_stem;
  fs::path iw_out;
  idwt->add_option("--in", iw_stem, "Band file stem")->required();
  idwt->add_option("--out", iw_out, "Output image")->required();

  auto* checker = app.add_subcommand("checkerboard", "Phase imbalance of transposed conv vs sub-pixel upsampling");
  int cb_seeds = 50;
  Index cb_kernel = 3, cb_stride = 2;
  std::string cb_out;
  checker->add_option("--seeds", cb_seeds, "Number of seeds");
  checker->add_option("--kernel", cb_kernel, "Transposed conv kernel size");
  checker->add_option("--stride", cb_stride, "Stride / upscale factor");
  checker->add_option("--out", cb_out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kArgument;
  }

  try {
    if (*phantoms) return cmd_phantoms(ph_out, ph_n, ph_shape, ph_classes, g.seed);
    if (*preprocess) return cmd_preprocess(pp_in, pp_out, pp_modality);
    if (*train_cmd) {
      auto cfg = g.run_config();
      if (tr_val >= 0) cfg.val_cases = tr_val;
      if (tr_no_wavelet) cfg.wavelet_branch = false;
      return cmd_train(cfg, tr_data, tr_out, tr_resume);
    }
    if (*eval) return cmd_eval(ev_ckpt, ev_data, ev_out, ev_patch, ev_overlap);
    if (*dwt) return cmd_dwt(dw_in, dw_stem, dw_axes, dw_levels);
    if (*idwt) return cmd_idwt(iw_stem, iw_out);
    if (*checker) return cmd_checkerboard(g.seed, cb_seeds, cb_kernel, cb_stride, cb_out);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgument;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgument;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
