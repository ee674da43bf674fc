#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "neunet/volume.hpp"

namespace neunet {

enum class Modality { CT, MRI };

std::string to_string(Modality m);
Modality parse_modality(const std::string& text);

struct DatasetFingerprint {
  Spacing3 median_spacing{1.0, 1.0, 1.0};
  Spacing3 spacing_p10{1.0, 1.0, 1.0};
  Modality modality = Modality::CT;
  std::pair<double, double> foreground_clip{0.0, 0.0};  // 0.5th and 99.5th percentiles
  double foreground_mean = 0.0;
  double foreground_std = 1.0;
  int num_classes = 2;
};

struct SegSample {
  Volume4<float> image;
  LabelVolume label;
  std::string case_id;

  const Spacing3& spacing() const { return image.spacing(); }
  /// Throws DimensionError when image and label grids differ.
  void validate() const;
};

struct Dataset {
  Modality modality = Modality::CT;
  int num_classes = 2;
  std::vector<SegSample> cases;
};

/// Median and 10th-percentile spacing per axis; clip bounds, mean and std of
/// raw intensities over all foreground (label > 0) voxels of every case.
/// Throws EmptyContentError when the dataset has no foreground.
DatasetFingerprint fingerprint(const Dataset& dataset);

/// Median spacing, except that an axis whose median is at least three times
/// the smallest other-axis median takes its 10th-percentile spacing.
Spacing3 target_spacing(const DatasetFingerprint& fp);

inline constexpr double kStdFloor = 1e-8;

/// CT: clamp to the clip bounds, then z-score with the global foreground
/// statistics. MRI: z-score with the sample's own mean and std.
SegSample normalize(const SegSample& sample, const DatasetFingerprint& fp);

/// crop_to_nonzero, resample to `spacing` (trilinear image, nearest label), normalize.
SegSample prepare(const SegSample& sample, const DatasetFingerprint& fp, const Spacing3& spacing);

/// Flips image and label together along each axis in `axes` with probability 1/2.
SegSample mirror_augment(const SegSample& sample, const std::array<bool, 3>& axes, std::mt19937_64& rng);

/// Synthetic CT-like cases: one or more non-overlapping ellipsoids or cuboids
/// per foreground class, class k intensities around 100 + 60 (k - 1) with a
/// per-case shift, background around 0, Gaussian noise everywhere.
Dataset make_phantoms(int n, const Index3& shape, int num_classes, std::uint64_t seed);

// Directory layout: cases/<id>.img.vol, cases/<id>.lbl.vol, fingerprint.json.

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, const DatasetFingerprint& fp,
                  bool normalized);
struct LoadedDataset {
  Dataset dataset;
  DatasetFingerprint fingerprint;
  bool normalized = false;
  bool has_fingerprint = false;  // otherwise CT is assumed and classes come from the labels
};
/// Throws IoError naming the path when the directory or a file is missing.
LoadedDataset load_dataset(const std::filesystem::path& dir);

void save_fingerprint(const std::filesystem::path& path, const DatasetFingerprint& fp, bool normalized);
std::pair<DatasetFingerprint, bool> load_fingerprint(const std::filesystem::path& path);

}  // namespace neunet
