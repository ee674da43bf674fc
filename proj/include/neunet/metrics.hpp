#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "neunet/volume.hpp"

namespace neunet {

/// Overlap 2|A n B| / (|A| + |B|) for one class. Two empty masks score 1.
double dice_metric(const LabelVolume& pred, const LabelVolume& gt, int class_id);

/// Mask voxels with at least one 6-neighbour outside the mask (the volume
/// border counts as outside).
std::vector<Index3> surface_points(const LabelVolume& labels, int class_id);

/// Euclidean distance in millimetres between voxel indices.
inline double voxel_distance(const Index3& a, const Index3& b, const Spacing3& spacing) {
  const double dx = static_cast<double>(a[0] - b[0]) * spacing[0];
  const double dy = static_cast<double>(a[1] - b[1]) * spacing[1];
  const double dz = static_cast<double>(a[2] - b[2]) * spacing[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// For each point of `from`, the distance to its nearest neighbour in `to`.
std::vector<double> directed_surface_distances(const std::vector<Index3>& from, const std::vector<Index3>& to,
                                               const Spacing3& spacing);

/// max(P95(pred -> gt), P95(gt -> pred)) over surface points, millimetres.
/// Returns nullopt (missing structure) when either mask is empty.
std::optional<double> hd95(const LabelVolume& pred, const LabelVolume& gt, int class_id,
                           const Spacing3& spacing);

/// Same statistic on explicit surface point sets.
std::optional<double> hd95_points(const std::vector<Index3>& pred, const std::vector<Index3>& gt,
                                  const Spacing3& spacing);

}  // namespace neunet
