// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Optional arguments select criteria by key (e.g. `neunet_acceptance wavelet hd95`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "neunet/checkerboard.hpp"
#include "neunet/losses.hpp"
#include "neunet/metrics.hpp"
#include "neunet/stats.hpp"
#include "neunet/train.hpp"
#include "neunet/wavelet.hpp"
#include "oracles.hpp"

using namespace neunet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

template <typename S>
double inner(const Volume4<S>& a, const Volume4<S>& b) {
  return (a.data().template cast<double>() * b.data().template cast<double>()).sum();
}

Index random_extent(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// ---------------------------------------------------------------------------

Outcome wavelet_round_trip() {
  Outcome o;
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst_err = 0.0, worst_energy = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int bits = 1 + t % 7;
    const AxisFlags flags{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
    Index e[3];
    for (int a = 0; a < 3; ++a) e[a] = flags[a] ? 2 * random_extent(rng, 1, 8) : random_extent(rng, 1, 9);
    const auto x = oracle::random_volume<float>({e[0], e[1], e[2], random_extent(rng, 1, 3)}, rng);
    const auto bands = dwt3d(x, flags);
    const auto back = idwt3d(bands);
    if (back.shape() != x.shape()) {
      o.pass = false;
      o.detail << "shape mismatch at trial " << t << "; ";
      continue;
    }
    worst_err = std::max(worst_err, static_cast<double>((back.data() - x.data()).abs().maxCoeff()));
    double e_bands = 0.0;
    for (const auto& b : bands.bands) e_bands += inner(b, b);
    const double e_in = inner(x, x);
    worst_energy = std::max(worst_energy, std::abs(e_bands - e_in) / e_in);
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && worst_err <= 1e-6 && worst_energy <= 1e-4 && secs < 10.0;
  o.detail << "200 volumes, max |x - idwt(dwt(x))| = " << worst_err << ", max energy rel err = " << worst_energy
           << ", " << secs << " s";
  return o;
}

Outcome pyramid_consistency() {
  Outcome o;
  std::mt19937_64 rng(1002);
  struct Case {
    std::vector<Index3> schedule;
    Index3 input;
  };
  std::vector<Index3> aniso{{1, 2, 2}};
  for (int t = 0; t < 4; ++t) aniso.push_back({2, 2, 2});
  const Case cases[] = {{std::vector<Index3>(5, Index3{2, 2, 2}), {32, 32, 32}}, {aniso, {16, 32, 32}}};
  for (const auto& c : cases) {
    const auto x = oracle::random_volume<float>(Shape4::from(c.input, 1), rng);
    const auto pyr = build_pyramid(x, c.schedule);
    Index3 cum{1, 1, 1};
    o.detail << "[";
    for (std::size_t t = 0; t < c.schedule.size(); ++t) {
      for (int a = 0; a < 3; ++a) cum[a] *= c.schedule[t][a];
      const Index3 want{c.input[0] / cum[0], c.input[1] / cum[1], c.input[2] / cum[2]};
      const auto flags = flags_from_stride(c.schedule[t]);
      const Index bands = Index{1} << (int(flags[0]) + int(flags[1]) + int(flags[2]));
      const auto& level = pyr[t];
      const bool ok = level.subbands.approx().spatial() == want && level.stacked.channels() == bands &&
                      level.stacked.spatial() == want;
      o.pass = o.pass && ok;
      o.detail << (t ? " " : "") << to_string(level.subbands.approx().spatial()) << "x" << level.stacked.channels()
               << (ok ? "" : "(!)");
    }
    o.detail << "] ";
  }
  return o;
}

Outcome shuffle_bijection() {
  Outcome o;
  std::mt19937_64 rng(1003);
  const ShuffleFactors factors[] = {{{2, 2, 2}}, {{1, 2, 2}}, {{4, 2, 1}}};
  int trials = 0;
  for (const auto& f : factors) {
    for (int t = 0; t < 10; ++t) {
      const Shape4 s{random_extent(rng, 1, 5), random_extent(rng, 1, 5), random_extent(rng, 1, 5),
                     f.product() * random_extent(rng, 1, 3)};
      const auto x = oracle::random_volume<float>(s, rng);
      const auto y = pixel_shuffle(x, f);
      const bool ok = (pixel_unshuffle(y, f).data() == x.data()).all() &&
                      (pixel_shuffle(pixel_unshuffle(y, f), f).data() == y.data()).all();
      o.pass = o.pass && ok;
      ++trials;
    }
  }
  o.detail << trials << " random volumes over factors (2,2,2), (1,2,2), (4,2,1), bitwise identity";
  return o;
}

Outcome transposed_decomposition() {
  Outcome o;
  std::mt19937_64 rng(1004);
  const std::pair<Index, Index> pairs[] = {{2, 2}, {4, 2}};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto [ks, st] = pairs[t % 2];
    const Index pad = ks == 4 ? 1 : 0;
    ConvKernel<float> k(random_extent(rng, 1, 3), random_extent(rng, 1, 3),
                        ConvGeometry{{ks, ks, ks}, {st, st, st}, {pad, pad, pad}});
    oracle::fill_kernel(k, rng);
    const auto x = oracle::random_volume<float>(
        {random_extent(rng, 2, 6), random_extent(rng, 2, 6), random_extent(rng, 2, 6), k.out_channels}, rng);
    const auto direct = transposed_conv3d(x, k);
    const auto via = transposed_via_phases(x, decompose_transposed(k), k.geometry);
    if (via.shape() != direct.shape()) {
      o.pass = false;
      continue;
    }
    worst = std::max(worst, static_cast<double>((via.data() - direct.data()).abs().maxCoeff()));
  }
  o.pass = o.pass && worst <= 1e-5;
  o.detail << "100 trials over (k, s) = (2,2), (4,2), max |phases - direct| over all voxels = " << worst;
  return o;
}

Outcome adjoint_identity() {
  Outcome o;
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    ConvGeometry g;
    for (int a = 0; a < 3; ++a) {
      g.ksize[a] = random_extent(rng, 1, 4);
      g.stride[a] = random_extent(rng, 1, 2);
      g.pad[a] = random_extent(rng, 0, g.ksize[a] - 1);
    }
    ConvKernel<float> k(random_extent(rng, 1, 3), random_extent(rng, 1, 3), g);
    oracle::fill_kernel(k, rng);
    k.bias.data().setZero();
    // Extents with (n + 2p - k) divisible by s make the transposed output land back on n.
    Index e[3];
    for (int a = 0; a < 3; ++a) {
      Index lo = g.ksize[a] - 2 * g.pad[a];
      while (lo < 1) lo += g.stride[a];
      e[a] = lo + g.stride[a] * random_extent(rng, 0, 3);
    }
    const auto x = oracle::random_volume<float>({e[0], e[1], e[2], k.in_channels}, rng);
    const auto cx = conv3d(x, k);
    const auto y = oracle::random_volume<float>(cx.shape(), rng);
    const auto ty = transposed_conv3d(y, k);
    if (ty.shape() != x.shape()) {
      o.pass = false;
      o.detail << "shape mismatch at trial " << t << "; ";
      continue;
    }
    const double lhs = inner(cx, y), rhs = inner(x, ty);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-12));
  }
  o.pass = o.pass && worst <= 1e-4;
  o.detail << "100 random geometries, max relative |<conv x, y> - <x, convT y>| = " << worst;
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  const auto t0 = Clock::now();
  int cases = 0;
  double worst = 0.0;
  for (auto& c : gradcheck::all_cases()) {
    const auto r = gradcheck::run(std::move(c));
    ++cases;
    worst = std::max(worst, r.check.worst_rel);
    if (r.check.failures != 0) {
      o.pass = false;
      o.detail << r.name << " failed " << r.check.failures << "/" << r.check.checked << "; ";
    }
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < 120.0;
  o.detail << cases << " graphs, worst relative error " << worst << " (elements with |grad| >= 1e-6), " << secs
           << " s";
  return o;
}

Outcome loss_constants() {
  Outcome o;
  const auto w = DeepSupWeights::rational();
  const std::int64_t want[] = {32, 16, 8, 4, 2};
  std::int64_t num = 0, den = 63;
  for (int i = 0; i < DeepSupWeights::heads; ++i) {
    o.pass = o.pass && w[i].num * 63 == want[i] * w[i].den;
    num += w[i].num * (den / w[i].den);
  }
  o.pass = o.pass && num == 62;
  o.detail << "weights " << w[0].num << "/" << w[0].den << ".." << w[4].num << "/" << w[4].den << ", sum " << num
           << "/" << den;

  std::mt19937_64 rng(1007);
  double worst_ce = 0.0;
  for (int classes = 2; classes <= 5; ++classes) {
    const auto labels = gradcheck::random_labels({4, 3, 5}, classes, rng);
    const auto uniform = Volume4<double>::constant({4, 3, 5, classes}, 1.0 / classes);
    worst_ce = std::max(worst_ce, std::abs(ce_loss(uniform, one_hot<double>(labels)) - std::log(double(classes))));
  }
  const auto labels = gradcheck::random_labels({6, 6, 6}, 3, rng);
  const auto g = one_hot<double>(labels);
  const double perfect = dice_loss(g, g);
  o.pass = o.pass && worst_ce <= 1e-6 && perfect <= 1e-5;
  o.detail << ", |CE(uniform) - ln C| <= " << worst_ce << " for C = 2..5, dice(perfect) = " << perfect;
  return o;
}

Outcome hd95_oracle() {
  Outcome o;
  std::mt19937_64 rng(1008);
  int pairs = 0, mismatches = 0, max_points = 0;
  auto make_mask = [&](const Index3& shape) {
    for (;;) {
      LabelVolume m(shape, 2);
      const double p = std::uniform_real_distribution<double>(0.02, 0.6)(rng);
      std::bernoulli_distribution b(p);
      for (Index v = 0; v < m.voxels(); ++v) m.data[v] = b(rng) ? 1 : 0;
      const auto n = oracle::surface_brute(m, 1).size();
      if (n >= 1 && n <= 200) return m;
    }
  };
  while (pairs < 500) {
    const Index3 shape{random_extent(rng, 3, 9), random_extent(rng, 3, 9), random_extent(rng, 3, 9)};
    const Spacing3 sp{std::uniform_real_distribution<double>(0.5, 3.0)(rng),
                      std::uniform_real_distribution<double>(0.5, 3.0)(rng),
                      std::uniform_real_distribution<double>(0.5, 3.0)(rng)};
    const auto a = make_mask(shape), b = make_mask(shape);
    const auto sa = oracle::surface_brute(a, 1), sb = oracle::surface_brute(b, 1);
    max_points = std::max<int>(max_points, static_cast<int>(std::max(sa.size(), sb.size())));
    const auto got = hd95(a, b, 1, sp);
    if (!got || *got != oracle::hd95_brute(sa, sb, sp)) ++mismatches;
    if (hd95(a, a, 1, sp).value_or(-1.0) != 0.0) ++mismatches;
    ++pairs;
  }
  o.pass = mismatches == 0;
  o.detail << pairs << " mask pairs (<= " << max_points << " surface points), " << mismatches
           << " mismatches vs all-pairs search, identical masks give 0";
  return o;
}

Outcome poly_schedule() {
  Outcome o;
  double worst = 0.0;
  for (int e_max : {60, 400, 1000}) {
    worst = std::max(worst, std::abs(poly_lr(0.01, e_max / 2, e_max) - 0.01 * std::pow(0.5, 0.99)));
  }
  o.pass = worst <= 1e-9;
  o.detail << "max |lr(E/2) - 0.01 * 0.5^0.99| = " << worst << " for E in {60, 400, 1000}";
  return o;
}

// ---------------------------------------------------------------------------
// Desk-scale training.

struct DeskRun {
  double final_dice = -1.0;
  double seconds = 0.0;
  bool finite = true;
  std::string error;
};

const Dataset& desk_data() {
  static const Dataset data = [] {
    auto raw = make_phantoms(20, {32, 32, 32}, 3, 7);
    const auto fp = fingerprint(raw);
    const auto sp = target_spacing(fp);
    Dataset out{raw.modality, raw.num_classes, {}};
    for (const auto& c : raw.cases) out.cases.push_back(prepare(c, fp, sp));
    return out;
  }();
  return data;
}

DeskRun desk_run(std::uint64_t seed, bool wavelet_branch) {
  auto cfg = RunConfig::desk(seed);
  cfg.wavelet_branch = wavelet_branch;
  const auto [tr, va] = split_dataset(desk_data(), cfg);
  DeskRun r;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochRecord& rec) {
    r.finite = r.finite && std::isfinite(rec.loss);
    std::cerr << "    seed " << seed << (wavelet_branch ? " full" : " ablated") << " epoch " << rec.epoch
              << " loss " << rec.loss;
    if (!rec.val_dice.empty()) std::cerr << " val dice " << rec.mean_val_dice();
    std::cerr << "\n";
  };
  const auto t0 = Clock::now();
  try {
    r.final_dice = train(cfg, tr, va, opts).final_score;
  } catch (const NumericError& e) {
    r.finite = false;
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::map<std::pair<std::uint64_t, bool>, DeskRun> desk_cache;

const DeskRun& cached_run(std::uint64_t seed, bool wavelet_branch) {
  auto key = std::make_pair(seed, wavelet_branch);
  auto it = desk_cache.find(key);
  if (it == desk_cache.end()) it = desk_cache.emplace(key, desk_run(seed, wavelet_branch)).first;
  return it->second;
}

Outcome desk_training() {
  Outcome o;
  const auto& r = cached_run(7, true);
  o.pass = r.finite && r.final_dice >= 0.85 && r.seconds <= 1200.0;
  o.detail << "seed 7, 16/4 split, 60 epochs: mean foreground val dice " << r.final_dice << " (>= 0.85), "
           << (r.finite ? "finite losses" : "non-finite loss " + r.error) << ", " << r.seconds << " s (<= 1200)";
  return o;
}

Outcome checkerboard() {
  Outcome o;
  std::vector<double> tr, sp;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = checkerboard_trial(seed, 3, 2);
    tr.push_back(t.transposed);
    sp.push_back(t.subpixel);
  }
  const double mt = median(tr), ms = median(sp);
  const double least = *std::min_element(tr.begin(), tr.end());
  o.pass = mt > ms && least > 0.0;
  o.detail << "50 seeds, median imbalance transposed " << mt << " vs sub-pixel " << ms << ", min transposed "
           << least;
  return o;
}

Outcome ablation() {
  Outcome o;
  int not_better = 0;
  bool completed = true;
  o.detail << "seeds 7..11 (full/ablated):";
  for (std::uint64_t seed = 7; seed < 12; ++seed) {
    const auto& full = cached_run(seed, true);
    const auto& off = cached_run(seed, false);
    completed = completed && off.finite && off.final_dice >= 0.0;
    not_better += off.final_dice <= full.final_dice;
    o.detail << " " << full.final_dice << "/" << off.final_dice;
  }
  o.pass = completed && not_better >= 3;
  o.detail << "; ablated <= full in " << not_better << " of 5 (>= 3)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"wavelet_reconstruction", wavelet_round_trip},
      {"pyramid_consistency", pyramid_consistency},
      {"shuffle_bijection", shuffle_bijection},
      {"transposed_decomposition", transposed_decomposition},
      {"adjoint_identity", adjoint_identity},
      {"gradient_checks", gradient_checks},
      {"loss_constants", loss_constants},
      {"hd95_oracle", hd95_oracle},
      {"poly_schedule", poly_schedule},
      {"desk_training", desk_training},
      {"checkerboard", checkerboard},
      {"ablation", ablation},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "threw: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
