#include "neunet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "neunet/stats.hpp"
#include "neunet/vol_io.hpp"

namespace neunet {

std::string to_string(Modality m) { return m == Modality::CT ? "CT" : "MRI"; }

Modality parse_modality(const std::string& text) {
  if (text == "CT" || text == "ct") return Modality::CT;
  if (text == "MRI" || text == "mri" || text == "MR") return Modality::MRI;
  throw ArgumentError("unknown modality '" + text + "' (expected CT or MRI)");
}

void SegSample::validate() const {
  if (image.spatial() != label.shape) {
    throw DimensionError("case " + case_id + ": image " + to_string(image.spatial()) + " vs label " +
                         to_string(label.shape));
  }
}

DatasetFingerprint fingerprint(const Dataset& dataset) {
  if (dataset.cases.empty()) throw EmptyContentError("fingerprint: dataset has no cases");
  DatasetFingerprint fp;
  fp.modality = dataset.modality;
  fp.num_classes = dataset.num_classes;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> s;
    for (const auto& c : dataset.cases) s.push_back(c.spacing()[a]);
    fp.median_spacing[a] = median(s);
    fp.spacing_p10[a] = percentile(s, 0.10);
  }
  std::vector<double> fg;
  for (const auto& c : dataset.cases) {
    c.validate();
    for (Index v = 0; v < c.label.voxels(); ++v) {
      if (c.label.data[v] > 0) fg.push_back(c.image.data()[v * c.image.channels()]);
    }
  }
  if (fg.empty()) throw EmptyContentError("fingerprint: no foreground voxels in any case");
  fp.foreground_clip = {percentile(fg, 0.005), percentile(fg, 0.995)};
  double mean = 0.0;
  for (double x : fg) mean += x;
  mean /= static_cast<double>(fg.size());
  double var = 0.0;
  for (double x : fg) var += (x - mean) * (x - mean);
  var /= static_cast<double>(fg.size());
  fp.foreground_mean = mean;
  fp.foreground_std = std::max(std::sqrt(var), kStdFloor);
  return fp;
}

Spacing3 target_spacing(const DatasetFingerprint& fp) {
  Spacing3 out = fp.median_spacing;
  for (int a = 0; a < 3; ++a) {
    double smallest_other = std::numeric_limits<double>::infinity();
    for (int b = 0; b < 3; ++b) {
      if (b != a) smallest_other = std::min(smallest_other, fp.median_spacing[b]);
    }
    if (fp.median_spacing[a] >= 3.0 * smallest_other) out[a] = fp.spacing_p10[a];
  }
  return out;
}

SegSample normalize(const SegSample& sample, const DatasetFingerprint& fp) {
  SegSample out = sample;
  auto& x = out.image.data();
  if (fp.modality == Modality::CT) {
    const auto [lo, hi] = fp.foreground_clip;
    if (lo > hi) throw ConfigError("fingerprint clip bounds are not ordered");
    for (Index i = 0; i < x.size(); ++i) {
      const double v = std::clamp(static_cast<double>(x[i]), lo, hi);
      x[i] = static_cast<float>((v - fp.foreground_mean) / fp.foreground_std);
    }
  } else {
    double mean = 0.0;
    for (Index i = 0; i < x.size(); ++i) mean += x[i];
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (Index i = 0; i < x.size(); ++i) var += (x[i] - mean) * (x[i] - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(x.size())), kStdFloor);
    for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>((x[i] - mean) / sd);
  }
  return out;
}

SegSample prepare(const SegSample& sample, const DatasetFingerprint& fp, const Spacing3& spacing) {
  sample.validate();
  SegSample out;
  out.case_id = sample.case_id;
  try {
    auto [img, box] = crop_to_nonzero(sample.image);
    out.image = std::move(img);
    out.label = crop(sample.label, box);
  } catch (const EmptyContentError&) {
    out.image = sample.image;
    out.label = sample.label;
  }
  if (out.image.spacing() != spacing) {
    out.image = resample(out.image, spacing, Interp::trilinear);
    out.label = resample(out.label, spacing);
  }
  return normalize(out, fp);
}

SegSample mirror_augment(const SegSample& sample, const std::array<bool, 3>& axes, std::mt19937_64& rng) {
  sample.validate();
  SegSample out = sample;
  std::bernoulli_distribution coin(0.5);
  for (int a = 0; a < 3; ++a) {
    if (!axes[a] || !coin(rng)) continue;
    out.image = flip(out.image, a);
    out.label = flip(out.label, a);
  }
  return out;
}

namespace {

struct Blob {
  bool ellipsoid;
  std::array<double, 3> center;
  std::array<double, 3> radius;

  bool contains(Index i, Index j, Index k, double grow = 0.0) const {
    const double p[3] = {double(i), double(j), double(k)};
    if (ellipsoid) {
      double s = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = (p[a] - center[a]) / (radius[a] + grow);
        s += d * d;
      }
      return s <= 1.0;
    }
    for (int a = 0; a < 3; ++a) {
      if (std::abs(p[a] - center[a]) > radius[a] + grow) return false;
    }
    return true;
  }
};

}  // namespace

Dataset make_phantoms(int n, const Index3& shape, int num_classes, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("make_phantoms: n must be positive");
  if (num_classes < 2) throw ArgumentError("make_phantoms: need at least one foreground class");
  for (Index s : shape) {
    if (s < 8) throw ArgumentError("make_phantoms: every extent must be at least 8 voxels");
  }
  constexpr double kNoise = 20.0;
  constexpr double kShift = 10.0;
  constexpr int kAttempts = 200;
  constexpr double kMinRadius = 4.0;

  Dataset ds;
  ds.modality = Modality::CT;
  ds.num_classes = num_classes;
  for (int c = 0; c < n; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, kNoise);

    SegSample s;
    s.case_id = "case_" + std::string(c < 10 ? "00" : c < 100 ? "0" : "") + std::to_string(c);
    s.image = Volume4<float>(Shape4::from(shape, 1));
    s.label = LabelVolume(shape, num_classes);

    for (int k = 1; k < num_classes; ++k) {
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        Blob b;
        b.ellipsoid = unit(rng) < 0.5;
        bool fits = true;
        for (int a = 0; a < 3; ++a) {
          const double rmax = std::max(kMinRadius, static_cast<double>(shape[a]) / 4.0);
          b.radius[a] = kMinRadius + unit(rng) * (rmax - kMinRadius);
          const double lo = b.radius[a] + 1.0;
          const double hi = static_cast<double>(shape[a]) - 2.0 - b.radius[a];
          if (hi < lo) fits = false;
          b.center[a] = lo + unit(rng) * std::max(0.0, hi - lo);
        }
        if (!fits) continue;
        // Keep a one-voxel gap between structures.
        bool clash = false;
        for (Index i = 0; i < shape[0] && !clash; ++i)
          for (Index j = 0; j < shape[1] && !clash; ++j)
            for (Index q = 0; q < shape[2] && !clash; ++q) {
              if (s.label(i, j, q) != 0 && b.contains(i, j, q, 1.0)) clash = true;
            }
        if (clash) continue;
        Index painted = 0;
        for (Index i = 0; i < shape[0]; ++i)
          for (Index j = 0; j < shape[1]; ++j)
            for (Index q = 0; q < shape[2]; ++q) {
              if (b.contains(i, j, q)) {
                s.label(i, j, q) = k;
                ++painted;
              }
            }
        if (painted > 0) break;
      }
    }

    std::vector<double> level(num_classes, 0.0);
    for (int k = 1; k < num_classes; ++k) level[k] = 100.0 + 60.0 * (k - 1) + kShift * (2.0 * unit(rng) - 1.0);
    for (Index v = 0; v < s.label.voxels(); ++v) {
      s.image.data()[v] = static_cast<float>(level[s.label.data[v]] + noise(rng));
    }
    ds.cases.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------

void save_fingerprint(const std::filesystem::path& path, const DatasetFingerprint& fp, bool normalized) {
  nlohmann::ordered_json j;
  j["median_spacing"] = fp.median_spacing;
  j["spacing_p10"] = fp.spacing_p10;
  j["modality"] = to_string(fp.modality);
  j["foreground_clip"] = {fp.foreground_clip.first, fp.foreground_clip.second};
  j["foreground_mean"] = fp.foreground_mean;
  j["foreground_std"] = fp.foreground_std;
  j["num_classes"] = fp.num_classes;
  j["normalized"] = normalized;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
}

std::pair<DatasetFingerprint, bool> load_fingerprint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  DatasetFingerprint fp;
  bool normalized = false;
  try {
    const auto j = nlohmann::json::parse(is);
    fp.median_spacing = j.at("median_spacing").get<Spacing3>();
    fp.spacing_p10 = j.at("spacing_p10").get<Spacing3>();
    fp.modality = parse_modality(j.at("modality").get<std::string>());
    const auto clip = j.at("foreground_clip").get<std::array<double, 2>>();
    fp.foreground_clip = {clip[0], clip[1]};
    fp.foreground_mean = j.at("foreground_mean").get<double>();
    fp.foreground_std = j.at("foreground_std").get<double>();
    fp.num_classes = j.at("num_classes").get<int>();
    normalized = j.value("normalized", false);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (fp.foreground_clip.first > fp.foreground_clip.second) throw ConfigError(path.string() + ": clip bounds not ordered");
  if (!(fp.foreground_std > 0.0)) throw ConfigError(path.string() + ": foreground_std must be positive");
  return {fp, normalized};
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, const DatasetFingerprint& fp,
                  bool normalized) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "cases", ec);
  if (ec) throw IoError("cannot create " + (dir / "cases").string() + ": " + ec.message());
  for (const auto& c : dataset.cases) {
    c.validate();
    save_vol(dir / "cases" / (c.case_id + ".img.vol"), c.image);
    save_vol(dir / "cases" / (c.case_id + ".lbl.vol"), c.label);
  }
  save_fingerprint(dir / "fingerprint.json", fp, normalized);
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  const auto cases = dir / "cases";
  if (!std::filesystem::is_directory(cases)) throw IoError("dataset directory not found: " + cases.string());
  LoadedDataset out;
  out.has_fingerprint = std::filesystem::exists(dir / "fingerprint.json");
  if (out.has_fingerprint) std::tie(out.fingerprint, out.normalized) = load_fingerprint(dir / "fingerprint.json");
  out.dataset.modality = out.fingerprint.modality;

  std::vector<std::string> ids;
  const std::string suffix = ".img.vol";
  for (const auto& e : std::filesystem::directory_iterator(cases)) {
    const auto name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw IoError("no cases in " + cases.string());
  for (const auto& id : ids) {
    SegSample s;
    s.case_id = id;
    s.image = load_image(cases / (id + ".img.vol"));
    s.label = load_labels(cases / (id + ".lbl.vol"), out.has_fingerprint ? out.fingerprint.num_classes : 0);
    s.validate();
    out.dataset.cases.push_back(std::move(s));
  }
  if (!out.has_fingerprint) {
    int classes = 2;
    for (const auto& c : out.dataset.cases) classes = std::max(classes, c.label.num_classes);
    for (auto& c : out.dataset.cases) c.label.num_classes = classes;
    out.fingerprint.num_classes = classes;
  }
  out.dataset.num_classes = out.fingerprint.num_classes;
  return out;
}

}  // namespace neunet
