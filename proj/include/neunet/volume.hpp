#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "neunet/errors.hpp"

namespace neunet {

using Index = Eigen::Index;
using Index3 = std::array<Index, 3>;
using Spacing3 = std::array<double, 3>;

/// Extents of a 4-axis volume: spatial (h, w, d) and channel c.
struct Shape4 {
  Index h = 0;
  Index w = 0;
  Index d = 0;
  Index c = 0;

  Index voxels() const { return h * w * d; }
  Index size() const { return voxels() * c; }
  Index3 spatial() const { return {h, w, d}; }
  Index operator[](int axis) const { return axis == 0 ? h : axis == 1 ? w : axis == 2 ? d : c; }
  bool operator==(const Shape4&) const = default;

  static Shape4 from(const Index3& s, Index channels) { return {s[0], s[1], s[2], channels}; }
};

std::string to_string(const Shape4& s);
std::string to_string(const Index3& s);
std::string to_string(const Spacing3& s);

/// Row-major voxels x channels matrix view used by the GEMM kernels.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense (H, W, D, C) volume, row-major with the channel axis fastest, plus
/// voxel spacing in millimetres.
template <typename Scalar>
class Volume4 {
 public:
  using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Volume4() = default;
  explicit Volume4(const Shape4& shape, const Spacing3& spacing = {1.0, 1.0, 1.0});
  Volume4(const Shape4& shape, const Spacing3& spacing, Buffer data);

  static Volume4 constant(const Shape4& shape, Scalar value, const Spacing3& spacing = {1.0, 1.0, 1.0});

  const Shape4& shape() const { return shape_; }
  Index3 spatial() const { return shape_.spatial(); }
  Index channels() const { return shape_.c; }
  Index voxels() const { return shape_.voxels(); }
  Index size() const { return shape_.size(); }
  const Spacing3& spacing() const { return spacing_; }
  void set_spacing(const Spacing3& spacing);

  Index offset(Index i, Index j, Index k, Index c = 0) const {
    return ((i * shape_.w + j) * shape_.d + k) * shape_.c + c;
  }
  Scalar& operator()(Index i, Index j, Index k, Index c = 0) { return data_[offset(i, j, k, c)]; }
  Scalar operator()(Index i, Index j, Index k, Index c = 0) const { return data_[offset(i, j, k, c)]; }

  Buffer& data() { return data_; }
  const Buffer& data() const { return data_; }

  Eigen::Map<RowMatrix<Scalar>> matrix() { return {data_.data(), shape_.voxels(), shape_.c}; }
  Eigen::Map<const RowMatrix<Scalar>> matrix() const { return {data_.data(), shape_.voxels(), shape_.c}; }

  bool all_finite() const { return data_.allFinite(); }

  /// Same values reinterpreted with a new shape of equal element count.
  Volume4 reshaped(const Shape4& shape) const;

  template <typename Other>
  Volume4<Other> cast() const {
    return Volume4<Other>(shape_, spacing_, data_.template cast<Other>());
  }

 private:
  Shape4 shape_{};
  Spacing3 spacing_{1.0, 1.0, 1.0};
  Buffer data_;
};

/// Integer label map over (H, W, D). Values lie in [0, num_classes).
struct LabelVolume {
  using Buffer = Eigen::Array<std::int32_t, Eigen::Dynamic, 1>;

  LabelVolume() = default;
  LabelVolume(const Index3& shape, int num_classes, const Spacing3& spacing = {1.0, 1.0, 1.0});
  LabelVolume(const Index3& shape, int num_classes, const Spacing3& spacing, Buffer data);

  Index3 shape{0, 0, 0};
  Spacing3 spacing{1.0, 1.0, 1.0};
  int num_classes = 1;
  Buffer data;

  Index voxels() const { return shape[0] * shape[1] * shape[2]; }
  Index offset(Index i, Index j, Index k) const { return (i * shape[1] + j) * shape[2] + k; }
  std::int32_t& operator()(Index i, Index j, Index k) { return data[offset(i, j, k)]; }
  std::int32_t operator()(Index i, Index j, Index k) const { return data[offset(i, j, k)]; }

  /// Throws ArgumentError if any value falls outside [0, num_classes).
  void validate() const;
  bool operator==(const LabelVolume& o) const {
    return shape == o.shape && num_classes == o.num_classes && (data == o.data).all();
  }
};

/// Offset and extent of an axis-aligned box in voxel units.
struct BoundingBox {
  Index3 offset{0, 0, 0};
  Index3 extent{0, 0, 0};
  bool operator==(const BoundingBox&) const = default;
};

enum class Interp { trilinear, nearest };
enum class PadMode { zero, edge };

template <typename Scalar>
Volume4<Scalar> concat_channels(const std::vector<Volume4<Scalar>>& parts);

template <typename Scalar>
Volume4<Scalar> slice_channels(const Volume4<Scalar>& v, Index first, Index count);

/// Tight box around voxels with any nonzero channel.
template <typename Scalar>
std::pair<Volume4<Scalar>, BoundingBox> crop_to_nonzero(const Volume4<Scalar>& v);

template <typename Scalar>
Volume4<Scalar> crop(const Volume4<Scalar>& v, const BoundingBox& box);
LabelVolume crop(const LabelVolume& v, const BoundingBox& box);

/// Resample onto a grid with the given spacing. New extent per axis is
/// round(old_mm / target), at least one voxel. Borders clamp to the edge.
template <typename Scalar>
Volume4<Scalar> resample(const Volume4<Scalar>& v, const Spacing3& target, Interp mode);
LabelVolume resample(const LabelVolume& v, const Spacing3& target);

/// Nearest-neighbour resize of a label map to an explicit grid.
LabelVolume resize_nearest(const LabelVolume& v, const Index3& shape);

template <typename Scalar>
Volume4<Scalar> pad(const Volume4<Scalar>& v, const Index3& before, const Index3& after, PadMode mode);
LabelVolume pad(const LabelVolume& v, const Index3& before, const Index3& after);

template <typename Scalar>
Volume4<Scalar> flip(const Volume4<Scalar>& v, int axis);
LabelVolume flip(const LabelVolume& v, int axis);

}  // namespace neunet
