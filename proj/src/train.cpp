#include "neunet/train.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "neunet/losses.hpp"
#include "neunet/metrics.hpp"

namespace neunet {

double poly_lr(double initial_lr, int epoch, int max_epochs, double exponent) {
  if (max_epochs < 1) throw ArgumentError("poly_lr: max_epochs must be >= 1");
  if (epoch < 0 || epoch > max_epochs) throw ArgumentError("poly_lr: epoch outside [0, max_epochs]");
  return initial_lr * std::pow(1.0 - static_cast<double>(epoch) / static_cast<double>(max_epochs), exponent);
}

void RunConfig::validate() const {
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (!(initial_lr > 0.0)) throw ArgumentError("learning rate must be positive");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (workers < 1) throw ArgumentError("workers must be >= 1");
  if (val_every < 1) throw ArgumentError("val_every must be >= 1");
  if (val_cases < 0) throw ArgumentError("val_cases must be >= 0");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ArgumentError("overlap must lie in [0, 1)");
  if (!(foreground_prob >= 0.0 && foreground_prob <= 1.0)) throw ArgumentError("foreground_prob must lie in [0, 1]");
  if (momentum < 0.0 || momentum >= 1.0) throw ArgumentError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ArgumentError("weight decay must be >= 0");
  for (Index p : patch_size) {
    if (p < 1) throw ArgumentError("patch extents must be positive");
  }
}

NetConfig RunConfig::net_config(Index num_classes, Index in_channels) const {
  auto c = NetConfig::make(strides, base_channels, channel_cap, num_classes, in_channels);
  c.wavelet_branch = wavelet_branch;
  return c;
}

RunConfig RunConfig::desk(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.epochs = 60;
  c.val_cases = 4;
  c.batch_size = 1;
  c.momentum = 0.9;
  return c;
}

void RunConfig::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries()) {
    if (key == "seed") seed = std::stoull(value);
    else if (key == "epochs") epochs = static_cast<int>(kv.get_int(key));
    else if (key == "lr" || key == "initial_lr") initial_lr = kv.get_double(key);
    else if (key == "momentum") momentum = kv.get_double(key);
    else if (key == "weight_decay") weight_decay = kv.get_double(key);
    else if (key == "nesterov") nesterov = kv.get_int(key) != 0;
    else if (key == "batch" || key == "batch_size") batch_size = static_cast<int>(kv.get_int(key));
    else if (key == "patch" || key == "patch_size") patch_size = kv.get_index3(key);
    else if (key == "workers") workers = static_cast<int>(kv.get_int(key));
    else if (key == "val_every") val_every = static_cast<int>(kv.get_int(key));
    else if (key == "val_cases") val_cases = static_cast<int>(kv.get_int(key));
    else if (key == "overlap") overlap = kv.get_double(key);
    else if (key == "foreground_prob") foreground_prob = kv.get_double(key);
    else if (key == "mirror_axes") {
      const auto m = kv.get_index3(key);
      mirror_axes = {m[0] != 0, m[1] != 0, m[2] != 0};
    } else if (key == "base_channels") base_channels = kv.get_int(key);
    else if (key == "channel_cap") channel_cap = kv.get_int(key);
    else if (key == "wavelet_branch") wavelet_branch = kv.get_int(key) != 0;
    else if (key.starts_with("stride.")) {
      const int t = std::stoi(key.substr(7));
      if (t < 1 || t > 5) throw ConfigError("stride index must be 1..5: " + key);
      strides[t - 1] = kv.get_index3(key);
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
}

KeyValues RunConfig::to_kv() const {
  KeyValues kv;
  kv.set("seed", std::to_string(seed));
  kv.set("epochs", epochs);
  kv.set("lr", initial_lr);
  kv.set("momentum", momentum);
  kv.set("weight_decay", weight_decay);
  kv.set("nesterov", nesterov ? 1 : 0);
  kv.set("batch", batch_size);
  kv.set("patch", patch_size);
  kv.set("workers", workers);
  kv.set("val_every", val_every);
  kv.set("val_cases", val_cases);
  kv.set("overlap", overlap);
  kv.set("foreground_prob", foreground_prob);
  kv.set("mirror_axes", Index3{mirror_axes[0], mirror_axes[1], mirror_axes[2]});
  kv.set("base_channels", static_cast<long long>(base_channels));
  kv.set("channel_cap", static_cast<long long>(channel_cap));
  kv.set("wavelet_branch", wavelet_branch ? 1 : 0);
  for (int t = 0; t < 5; ++t) kv.set("stride." + std::to_string(t + 1), strides[t]);
  return kv;
}

double EpochRecord::mean_val_dice() const {
  if (val_dice.empty()) return -1.0;
  return std::accumulate(val_dice.begin(), val_dice.end(), 0.0) / static_cast<double>(val_dice.size());
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& all, const RunConfig& cfg) {
  const int n = static_cast<int>(all.cases.size());
  const int nv = cfg.val_cases > 0 ? cfg.val_cases : std::max(1, n / 5);
  if (nv >= n) {
    throw ArgumentError("need more cases than the " + std::to_string(nv) + " held out for validation (have " +
                        std::to_string(n) + ")");
  }
  Dataset tr{all.modality, all.num_classes, {}};
  Dataset va{all.modality, all.num_classes, {}};
  for (int i = 0; i < n; ++i) (i < n - nv ? tr : va).cases.push_back(all.cases[i]);
  return {tr, va};
}

SegSample sample_patch(const SegSample& s, const Index3& patch, double foreground_prob, std::mt19937_64& rng) {
  s.validate();
  const auto in = s.image.spatial();
  Index3 after{0, 0, 0};
  for (int a = 0; a < 3; ++a) after[a] = std::max<Index>(0, patch[a] - in[a]);
  const auto image = pad(s.image, {0, 0, 0}, after, PadMode::zero);
  const auto label = pad(s.label, {0, 0, 0}, after);
  const auto ext = image.spatial();

  Index3 start{0, 0, 0};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool force = unit(rng) < foreground_prob;
  std::vector<Index> fg;
  if (force) {
    for (Index v = 0; v < label.voxels(); ++v) {
      if (label.data[v] > 0) fg.push_back(v);
    }
  }
  if (!fg.empty()) {
    const Index v = fg[std::uniform_int_distribution<std::size_t>(0, fg.size() - 1)(rng)];
    const Index3 pos{v / (ext[1] * ext[2]), (v / ext[2]) % ext[1], v % ext[2]};
    for (int a = 0; a < 3; ++a) {
      const Index lo = std::max<Index>(0, pos[a] - patch[a] + 1);
      const Index hi = std::min(pos[a], ext[a] - patch[a]);
      start[a] = std::uniform_int_distribution<Index>(lo, hi)(rng);
    }
  } else {
    for (int a = 0; a < 3; ++a) start[a] = std::uniform_int_distribution<Index>(0, ext[a] - patch[a])(rng);
  }
  const BoundingBox box{start, patch};
  return {crop(image, box), crop(label, box), s.case_id};
}

std::vector<double> validation_dice(const Network<float>& net, const Dataset& val, const Index3& patch,
                                    double overlap) {
  const int classes = static_cast<int>(net.config().num_classes);
  std::vector<double> dice(classes - 1, 0.0);
  if (val.cases.empty()) return dice;
  for (const auto& c : val.cases) {
    const auto pred = infer(net, c.image, patch, overlap);
    for (int k = 1; k < classes; ++k) dice[k - 1] += dice_metric(pred, c.label, k);
  }
  for (auto& d : dice) d /= static_cast<double>(val.cases.size());
  return dice;
}

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, int epoch, int slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(slot)};
  return std::mt19937_64(seq);
}

constexpr int kShuffleSlot = -1;

SegSample training_sample(const RunConfig& cfg, const SegSample& s, int epoch, int slot) {
  auto rng = derived_rng(cfg.seed, epoch, slot);
  return mirror_augment(sample_patch(s, cfg.patch_size, cfg.foreground_prob, rng), cfg.mirror_axes, rng);
}

void write_log_header(std::ostream& os, int classes) {
  os << "epoch,lr,loss";
  for (int k = 1; k < classes; ++k) os << ",val_dice_" << k;
  os << "\n";
}

void write_log_row(std::ostream& os, const EpochRecord& r, int classes) {
  os << r.epoch << "," << std::setprecision(10) << r.lr << "," << std::setprecision(10) << r.loss;
  for (int k = 1; k < classes; ++k) {
    os << ",";
    if (!r.val_dice.empty()) os << std::setprecision(6) << r.val_dice[k - 1];
  }
  os << "\n";
}

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.cases.empty()) throw ArgumentError("training set is empty");
  const int classes = train_set.num_classes;
  const Index in_channels = train_set.cases.front().image.channels();
  const auto net_cfg = cfg.net_config(classes, in_channels);
  Network<float> net(net_cfg);
  {
    const auto total = net_cfg.cumulative_stride(NetConfig::kLayers - 1);
    for (int a = 0; a < 3; ++a) {
      if (cfg.patch_size[a] % total[a] != 0) {
        throw ArgumentError("patch " + to_string(cfg.patch_size) + " must be a multiple of " + to_string(total));
      }
    }
  }
  net.init(cfg.seed);
  ag::SgdState<float> sgd;
  ag::SgdOptions opt{cfg.initial_lr, cfg.momentum, cfg.weight_decay, cfg.nesterov};

  TrainResult result;
  int start_epoch = 0;
  const bool write = !options.out_dir.empty();
  const auto latest = options.out_dir / "latest.nvckpt";
  const auto log_path = options.out_dir / "train_log.csv";
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
  }
  if (options.resume) {
    if (!write) throw ArgumentError("resume needs an output directory");
    const auto ck = Checkpoint::load(latest);
    ck.apply(net);
    sgd.velocity = ck.velocity;
    start_epoch = ck.epoch;
    result.best_score = ck.best_score;
    result.best_epoch = static_cast<int>(std::stoll(ck.meta.get_or("best_epoch", "-1")));
  }
  std::ofstream log;
  if (write) {
    const bool fresh = !options.resume || !std::filesystem::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open " + log_path.string());
    if (fresh) write_log_header(log, classes);
  }

  const int n = static_cast<int>(train_set.cases.size());
  const int iterations = (n + cfg.batch_size - 1) / cfg.batch_size;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = poly_lr(cfg.initial_lr, epoch, cfg.epochs);
    opt.lr = rec.lr;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = derived_rng(cfg.seed, epoch, kShuffleSlot);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (int it = 0; it < iterations; ++it) {
      const int b0 = it * cfg.batch_size;
      const int b1 = std::min(n, b0 + cfg.batch_size);
      std::vector<SegSample> batch(b1 - b0);
      if (cfg.workers > 1) {
        std::vector<std::future<SegSample>> jobs;
        for (int i = b0; i < b1; ++i) {
          jobs.push_back(std::async(std::launch::async, [&, i] {
            return training_sample(cfg, train_set.cases[order[i]], epoch, i);
          }));
        }
        for (int i = b0; i < b1; ++i) batch[i - b0] = jobs[i - b0].get();
      } else {
        for (int i = b0; i < b1; ++i) batch[i - b0] = training_sample(cfg, train_set.cases[order[i]], epoch, i);
      }

      std::vector<Volume4<float>> grads;
      double batch_loss = 0.0;
      const float inv = 1.0f / static_cast<float>(batch.size());
      for (const auto& s : batch) {
        ag::Tape<float> tape;
        const auto bound = net.bind(tape, true);
        const auto trace = net.forward(tape, bound, s.image);
        const auto loss = ag::scale(ag::total_loss(trace.heads, s.label), inv);
        const double value = loss.value().data()[0];
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", case " + s.case_id);
        }
        batch_loss += value;
        tape.backward(loss);
        if (grads.empty()) {
          for (const auto& v : bound) grads.push_back(tape.grad(v));
        } else {
          for (std::size_t p = 0; p < bound.size(); ++p) grads[p].data() += tape.grad(bound[p]).data();
        }
      }
      ag::sgd_step(net.parameters(), grads, opt, sgd);
      loss_sum += batch_loss;
    }
    rec.loss = loss_sum / static_cast<double>(iterations);

    const bool last = epoch + 1 == cfg.epochs;
    if (!val_set.cases.empty() && ((epoch + 1) % cfg.val_every == 0 || last)) {
      rec.val_dice = validation_dice(net, val_set, cfg.patch_size, cfg.overlap);
      const double score = rec.mean_val_dice();
      if (score > result.best_score) {
        result.best_score = score;
        result.best_epoch = epoch;
        if (write) {
          KeyValues meta = cfg.to_kv();
          meta.set("best_epoch", epoch);
          Checkpoint::capture(net, nullptr, epoch + 1, score, meta).save(options.out_dir / "best.nvckpt");
        }
      }
      if (last) result.final_score = score;
    }
    if (write) {
      KeyValues meta = cfg.to_kv();
      meta.set("best_epoch", result.best_epoch);
      Checkpoint::capture(net, &sgd, epoch + 1, result.best_score, meta).save(latest);
      write_log_row(log, rec, classes);
      log.flush();
    }
    result.log.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

std::vector<MetricRow> evaluate(const Network<float>& net, const Dataset& data, const Index3& patch, double overlap) {
  std::vector<MetricRow> rows;
  const int classes = static_cast<int>(net.config().num_classes);
  for (const auto& c : data.cases) {
    const auto pred = infer(net, c.image, patch, overlap);
    for (int k = 1; k < classes; ++k) {
      rows.push_back({c.case_id, k, dice_metric(pred, c.label, k), hd95(pred, c.label, k, c.label.spacing)});
    }
  }
  return rows;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "case_id,class,dice,hd95_mm\n";
  for (const auto& r : rows) {
    os << r.case_id << "," << r.class_id << "," << std::setprecision(8) << r.dice << ",";
    if (r.hd95_mm) {
      os << std::setprecision(8) << *r.hd95_mm;
    } else {
      os << "NA";
    }
    os << "\n";
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "case_id,class,dice,hd95_mm") throw IoError("metrics CSV: bad header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, cls, dice, hd;
    if (!std::getline(ss, id, ',') || !std::getline(ss, cls, ',') || !std::getline(ss, dice, ',') ||
        !std::getline(ss, hd)) {
      throw IoError("metrics CSV: malformed row '" + line + "'");
    }
    MetricRow r;
    r.case_id = id;
    try {
      r.class_id = std::stoi(cls);
      r.dice = std::stod(dice);
      if (hd != "NA") r.hd95_mm = std::stod(hd);
    } catch (const std::logic_error&) {
      throw IoError("metrics CSV: malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace neunet
