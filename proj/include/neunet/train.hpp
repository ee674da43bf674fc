#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neunet/checkpoint.hpp"
#include "neunet/preprocess.hpp"

namespace neunet {

/// lr_0 * (1 - epoch / max_epochs)^exponent.
double poly_lr(double initial_lr, int epoch, int max_epochs, double exponent = 0.99);

struct RunConfig {
  std::uint64_t seed = 0;
  int epochs = 1000;
  double initial_lr = 0.01;
  double momentum = 0.99;
  double weight_decay = 3e-5;
  bool nesterov = true;
  int batch_size = 2;
  Index3 patch_size{32, 32, 32};
  int workers = 1;
  int val_every = 10;
  int val_cases = 0;  // 0: one fifth of the cases, at least one
  double overlap = 0.5;
  double foreground_prob = 1.0 / 3.0;
  std::array<bool, 3> mirror_axes{true, true, true};

  Index base_channels = 8;
  Index channel_cap = 64;
  std::vector<Index3> strides = std::vector<Index3>(5, Index3{2, 2, 2});
  bool wavelet_branch = true;

  /// Desk-scale run on 32^3 phantoms: 60 epochs, 4 validation cases, batch 1
  /// and momentum 0.9 (0.99 collapses the small classes within a few hundred steps).
  static RunConfig desk(std::uint64_t seed = 7);

  /// Throws ArgumentError for epochs < 1, lr <= 0 and similar.
  void validate() const;
  NetConfig net_config(Index num_classes, Index in_channels = 1) const;

  /// Applies recognised keys from a key-value file; unknown keys are a ConfigError.
  void apply(const KeyValues& kv);
  KeyValues to_kv() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<double> val_dice;  // per foreground class; empty when not validated

  double mean_val_dice() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  bool resume = false;            // continue from out_dir/latest.nvckpt
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_score = -1.0;
  int best_epoch = -1;
  double final_score = -1.0;  // mean foreground validation dice after the last epoch
};

/// Trains on prepared (normalized) cases. Writes latest.nvckpt every epoch,
/// best.nvckpt on a new best validation score and train_log.csv.
/// Throws NumericError on a non-finite loss or gradient.
TrainResult train(const RunConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const TrainOptions& options = {});

/// Splits the last `cfg.val_cases` cases off for validation.
std::pair<Dataset, Dataset> split_dataset(const Dataset& all, const RunConfig& cfg);

/// Patch crop for training: with probability foreground_prob the patch is
/// forced to contain a random foreground voxel. Extents smaller than the
/// patch are zero padded.
SegSample sample_patch(const SegSample& s, const Index3& patch, double foreground_prob, std::mt19937_64& rng);

/// Per-class dice (foreground classes, averaged over cases) of sliding-window predictions.
std::vector<double> validation_dice(const Network<float>& net, const Dataset& val, const Index3& patch, double overlap);

struct MetricRow {
  std::string case_id;
  int class_id = 0;
  double dice = 0.0;
  std::optional<double> hd95_mm;  // missing when either mask is empty
};

std::vector<MetricRow> evaluate(const Network<float>& net, const Dataset& data, const Index3& patch, double overlap);
void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& is);

}  // namespace neunet
