#pragma once

#include <array>
#include <numbers>
#include <vector>

#include "neunet/volume.hpp"

namespace neunet {

/// Orthonormal Haar analysis pair. Both filters act on the sample pair
/// (x[2k], x[2k+1]); g has its positive tap on the first element.
struct HaarFilters {
  static constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  static constexpr std::array<double, 2> h{inv_sqrt2, inv_sqrt2};
  static constexpr std::array<double, 2> g{inv_sqrt2, -inv_sqrt2};
};

using AxisFlags = std::array<bool, 3>;

template <typename Scalar>
using Signal = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Dwt1dResult {
  Signal<Scalar> approx;
  Signal<Scalar> detail;
};

/// Single-level Haar analysis. Length must be even and at least 2.
template <typename Scalar>
Dwt1dResult<Scalar> dwt1d(const Signal<Scalar>& x);

template <typename Scalar>
Signal<Scalar> idwt1d(const Signal<Scalar>& approx, const Signal<Scalar>& detail);

/// Sub-bands of one separable transform. Band index bit b is set when the
/// high-pass filter ran on a transformed axis; the first transformed axis is
/// the most significant bit (i -> 4, j -> 2, k -> 1 for a full 3D transform).
/// Band 0 is the approximation.
template <typename Scalar>
struct SubbandSet {
  std::vector<Volume4<Scalar>> bands;
  AxisFlags axis_flags{false, false, false};

  const Volume4<Scalar>& approx() const { return bands.front(); }
  int transformed_axes() const { return int(axis_flags[0]) + int(axis_flags[1]) + int(axis_flags[2]); }
};

template <typename Scalar>
SubbandSet<Scalar> dwt3d(const Volume4<Scalar>& v, const AxisFlags& flags);

template <typename Scalar>
Volume4<Scalar> idwt3d(const SubbandSet<Scalar>& s);

template <typename Scalar>
struct PyramidLevel {
  SubbandSet<Scalar> subbands;
  /// All bands stacked along channels in band order (band-major).
  Volume4<Scalar> stacked;
  /// Axes that were edge-padded by one voxel before transforming.
  AxisFlags padded{false, false, false};
};

/// Level t transforms level t-1's approximation (level 0 input is the
/// original volume) along the axes whose stride is 2.
template <typename Scalar>
struct WaveletPyramid {
  std::vector<PyramidLevel<Scalar>> levels;

  std::size_t size() const { return levels.size(); }
  const PyramidLevel<Scalar>& operator[](std::size_t t) const { return levels[t]; }
};

/// Strides must be 1 or 2 per axis. Odd extents on a transformed axis are
/// edge-padded by one voxel.
template <typename Scalar>
WaveletPyramid<Scalar> build_pyramid(const Volume4<Scalar>& input, const std::vector<Index3>& stride_schedule);

AxisFlags flags_from_stride(const Index3& stride);

}  // namespace neunet
