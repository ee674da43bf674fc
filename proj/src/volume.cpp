#include "neunet/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace neunet {

std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << s.h << "x" << s.w << "x" << s.d << "x" << s.c;
  return os.str();
}

std::string to_string(const Index3& s) {
  std::ostringstream os;
  os << s[0] << "x" << s[1] << "x" << s[2];
  return os.str();
}

std::string to_string(const Spacing3& s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << ")";
  return os.str();
}

namespace {

void check_spacing(const Spacing3& s) {
  for (double v : s) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw ArgumentError("spacing must be finite and positive, got " + to_string(s));
    }
  }
}

void check_shape(const Shape4& s) {
  if (s.h < 0 || s.w < 0 || s.d < 0 || s.c < 0) {
    throw DimensionError("negative volume extent " + to_string(s));
  }
}

}  // namespace

template <typename Scalar>
Volume4<Scalar>::Volume4(const Shape4& shape, const Spacing3& spacing)
    : shape_(shape), spacing_(spacing), data_(Buffer::Zero(shape.size())) {
  check_shape(shape);
  check_spacing(spacing);
}

template <typename Scalar>
Volume4<Scalar>::Volume4(const Shape4& shape, const Spacing3& spacing, Buffer data)
    : shape_(shape), spacing_(spacing), data_(std::move(data)) {
  check_shape(shape);
  check_spacing(spacing);
  if (data_.size() != shape_.size()) {
    throw DimensionError("buffer of " + std::to_string(data_.size()) + " values does not match shape " +
                         to_string(shape_));
  }
}

template <typename Scalar>
Volume4<Scalar> Volume4<Scalar>::constant(const Shape4& shape, Scalar value, const Spacing3& spacing) {
  return Volume4(shape, spacing, Buffer::Constant(shape.size(), value));
}

template <typename Scalar>
void Volume4<Scalar>::set_spacing(const Spacing3& spacing) {
  check_spacing(spacing);
  spacing_ = spacing;
}

template <typename Scalar>
Volume4<Scalar> Volume4<Scalar>::reshaped(const Shape4& shape) const {
  return Volume4(shape, spacing_, data_);
}

LabelVolume::LabelVolume(const Index3& shape_, int num_classes_, const Spacing3& spacing_)
    : shape(shape_), spacing(spacing_), num_classes(num_classes_), data(Buffer::Zero(shape_[0] * shape_[1] * shape_[2])) {
  check_spacing(spacing_);
  if (num_classes_ < 1) throw ArgumentError("num_classes must be positive");
}

LabelVolume::LabelVolume(const Index3& shape_, int num_classes_, const Spacing3& spacing_, Buffer data_)
    : shape(shape_), spacing(spacing_), num_classes(num_classes_), data(std::move(data_)) {
  check_spacing(spacing_);
  if (num_classes_ < 1) throw ArgumentError("num_classes must be positive");
  if (data.size() != voxels()) throw DimensionError("label buffer does not match shape " + to_string(shape));
  validate();
}

void LabelVolume::validate() const {
  if (data.size() == 0) return;
  if (data.minCoeff() < 0 || data.maxCoeff() >= num_classes) {
    throw ArgumentError("label value outside [0, " + std::to_string(num_classes) + ")");
  }
}

template <typename Scalar>
Volume4<Scalar> concat_channels(const std::vector<Volume4<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no parts");
  const auto& first = parts.front();
  Index total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].spatial() != first.spatial()) {
      throw DimensionError("concat_channels: part " + std::to_string(p) + " has spatial shape " +
                           to_string(parts[p].spatial()) + ", expected " + to_string(first.spatial()));
    }
    if (parts[p].spacing() != first.spacing()) {
      throw DimensionError("concat_channels: part " + std::to_string(p) + " has spacing " +
                           to_string(parts[p].spacing()) + ", expected " + to_string(first.spacing()));
    }
    total += parts[p].channels();
  }
  Volume4<Scalar> out(Shape4::from(first.spatial(), total), first.spacing());
  auto dst = out.matrix();
  Index col = 0;
  for (const auto& p : parts) {
    dst.middleCols(col, p.channels()) = p.matrix();
    col += p.channels();
  }
  return out;
}

template <typename Scalar>
Volume4<Scalar> slice_channels(const Volume4<Scalar>& v, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > v.channels()) {
    throw DimensionError("slice_channels: range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") outside " + std::to_string(v.channels()) + " channels");
  }
  Volume4<Scalar> out(Shape4::from(v.spatial(), count), v.spacing());
  out.matrix() = v.matrix().middleCols(first, count);
  return out;
}

template <typename Scalar>
std::pair<Volume4<Scalar>, BoundingBox> crop_to_nonzero(const Volume4<Scalar>& v) {
  const auto& s = v.shape();
  Index3 lo{s.h, s.w, s.d};
  Index3 hi{-1, -1, -1};
  const auto m = v.matrix();
  for (Index i = 0; i < s.h; ++i)
    for (Index j = 0; j < s.w; ++j)
      for (Index k = 0; k < s.d; ++k) {
        const Index row = (i * s.w + j) * s.d + k;
        if ((m.row(row).array() != Scalar(0)).any()) {
          lo = {std::min(lo[0], i), std::min(lo[1], j), std::min(lo[2], k)};
          hi = {std::max(hi[0], i), std::max(hi[1], j), std::max(hi[2], k)};
        }
      }
  if (hi[0] < 0) throw EmptyContentError("crop_to_nonzero: volume has no nonzero voxel");
  BoundingBox box{lo, {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}};
  return {crop(v, box), box};
}

namespace {

void check_box(const Index3& shape, const BoundingBox& box) {
  for (int a = 0; a < 3; ++a) {
    if (box.offset[a] < 0 || box.extent[a] < 1 || box.offset[a] + box.extent[a] > shape[a]) {
      throw DimensionError("crop box exceeds volume extent " + to_string(shape));
    }
  }
}

}  // namespace

template <typename Scalar>
Volume4<Scalar> crop(const Volume4<Scalar>& v, const BoundingBox& box) {
  check_box(v.spatial(), box);
  Volume4<Scalar> out(Shape4::from(box.extent, v.channels()), v.spacing());
  const Index c = v.channels();
  for (Index i = 0; i < box.extent[0]; ++i)
    for (Index j = 0; j < box.extent[1]; ++j) {
      const Scalar* src = &v.data()[v.offset(i + box.offset[0], j + box.offset[1], box.offset[2])];
      Scalar* dst = &out.data()[out.offset(i, j, 0)];
      std::copy(src, src + box.extent[2] * c, dst);
    }
  return out;
}

LabelVolume crop(const LabelVolume& v, const BoundingBox& box) {
  check_box(v.shape, box);
  LabelVolume out(box.extent, v.num_classes, v.spacing);
  for (Index i = 0; i < box.extent[0]; ++i)
    for (Index j = 0; j < box.extent[1]; ++j)
      for (Index k = 0; k < box.extent[2]; ++k)
        out(i, j, k) = v(i + box.offset[0], j + box.offset[1], k + box.offset[2]);
  return out;
}

namespace {

struct AxisMap {
  Index out_size;
  double ratio;  // output step in input voxel units
};

AxisMap axis_map(Index n, double from, double to) {
  const auto out = std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(n) * from / to)));
  return {out, to / from};
}

// Source index whose voxel contains the centre of output voxel i.
Index nearest_index(Index i, double ratio, Index n) {
  const auto src = static_cast<Index>(std::floor((static_cast<double>(i) + 0.5) * ratio));
  return std::clamp<Index>(src, 0, n - 1);
}

struct LinearTap {
  Index lo, hi;
  double frac;
};

LinearTap linear_tap(Index i, double ratio, Index n) {
  const double u = (static_cast<double>(i) + 0.5) * ratio - 0.5;
  const double fl = std::floor(u);
  const auto lo = static_cast<Index>(fl);
  return {std::clamp<Index>(lo, 0, n - 1), std::clamp<Index>(lo + 1, 0, n - 1), u - fl};
}

}  // namespace

template <typename Scalar>
Volume4<Scalar> resample(const Volume4<Scalar>& v, const Spacing3& target, Interp mode) {
  check_spacing(target);
  const auto in = v.spatial();
  std::array<AxisMap, 3> maps;
  for (int a = 0; a < 3; ++a) maps[a] = axis_map(in[a], v.spacing()[a], target[a]);
  const Index c = v.channels();
  Volume4<Scalar> out(Shape4{maps[0].out_size, maps[1].out_size, maps[2].out_size, c}, target);

  if (mode == Interp::nearest) {
    for (Index i = 0; i < maps[0].out_size; ++i) {
      const Index si = nearest_index(i, maps[0].ratio, in[0]);
      for (Index j = 0; j < maps[1].out_size; ++j) {
        const Index sj = nearest_index(j, maps[1].ratio, in[1]);
        for (Index k = 0; k < maps[2].out_size; ++k) {
          const Index sk = nearest_index(k, maps[2].ratio, in[2]);
          for (Index ch = 0; ch < c; ++ch) out(i, j, k, ch) = v(si, sj, sk, ch);
        }
      }
    }
    return out;
  }

  for (Index i = 0; i < maps[0].out_size; ++i) {
    const auto ti = linear_tap(i, maps[0].ratio, in[0]);
    for (Index j = 0; j < maps[1].out_size; ++j) {
      const auto tj = linear_tap(j, maps[1].ratio, in[1]);
      for (Index k = 0; k < maps[2].out_size; ++k) {
        const auto tk = linear_tap(k, maps[2].ratio, in[2]);
        for (Index ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (int a = 0; a < 2; ++a) {
            const Index si = a ? ti.hi : ti.lo;
            const double wi = a ? ti.frac : 1.0 - ti.frac;
            if (wi == 0.0) continue;
            for (int b = 0; b < 2; ++b) {
              const Index sj = b ? tj.hi : tj.lo;
              const double wj = b ? tj.frac : 1.0 - tj.frac;
              if (wj == 0.0) continue;
              for (int e = 0; e < 2; ++e) {
                const Index sk = e ? tk.hi : tk.lo;
                const double wk = e ? tk.frac : 1.0 - tk.frac;
                if (wk == 0.0) continue;
                acc += wi * wj * wk * static_cast<double>(v(si, sj, sk, ch));
              }
            }
          }
          out(i, j, k, ch) = static_cast<Scalar>(acc);
        }
      }
    }
  }
  return out;
}

LabelVolume resample(const LabelVolume& v, const Spacing3& target) {
  check_spacing(target);
  std::array<AxisMap, 3> maps;
  for (int a = 0; a < 3; ++a) maps[a] = axis_map(v.shape[a], v.spacing[a], target[a]);
  LabelVolume out({maps[0].out_size, maps[1].out_size, maps[2].out_size}, v.num_classes, target);
  for (Index i = 0; i < maps[0].out_size; ++i)
    for (Index j = 0; j < maps[1].out_size; ++j)
      for (Index k = 0; k < maps[2].out_size; ++k)
        out(i, j, k) = v(nearest_index(i, maps[0].ratio, v.shape[0]), nearest_index(j, maps[1].ratio, v.shape[1]),
                         nearest_index(k, maps[2].ratio, v.shape[2]));
  return out;
}

LabelVolume resize_nearest(const LabelVolume& v, const Index3& shape) {
  Spacing3 spacing;
  std::array<double, 3> ratio;
  for (int a = 0; a < 3; ++a) {
    if (shape[a] < 1) throw DimensionError("resize_nearest: empty target grid " + to_string(shape));
    ratio[a] = static_cast<double>(v.shape[a]) / static_cast<double>(shape[a]);
    spacing[a] = v.spacing[a] * ratio[a];
  }
  LabelVolume out(shape, v.num_classes, spacing);
  for (Index i = 0; i < shape[0]; ++i)
    for (Index j = 0; j < shape[1]; ++j)
      for (Index k = 0; k < shape[2]; ++k)
        out(i, j, k) = v(nearest_index(i, ratio[0], v.shape[0]), nearest_index(j, ratio[1], v.shape[1]),
                         nearest_index(k, ratio[2], v.shape[2]));
  return out;
}

template <typename Scalar>
Volume4<Scalar> pad(const Volume4<Scalar>& v, const Index3& before, const Index3& after, PadMode mode) {
  const auto in = v.spatial();
  Index3 out_shape;
  for (int a = 0; a < 3; ++a) {
    if (before[a] < 0 || after[a] < 0) throw ArgumentError("pad: negative pad width");
    out_shape[a] = in[a] + before[a] + after[a];
  }
  const Index c = v.channels();
  Volume4<Scalar> out(Shape4::from(out_shape, c), v.spacing());
  for (Index i = 0; i < out_shape[0]; ++i)
    for (Index j = 0; j < out_shape[1]; ++j)
      for (Index k = 0; k < out_shape[2]; ++k) {
        Index si = i - before[0], sj = j - before[1], sk = k - before[2];
        const bool inside = si >= 0 && si < in[0] && sj >= 0 && sj < in[1] && sk >= 0 && sk < in[2];
        if (!inside) {
          if (mode == PadMode::zero) continue;
          si = std::clamp<Index>(si, 0, in[0] - 1);
          sj = std::clamp<Index>(sj, 0, in[1] - 1);
          sk = std::clamp<Index>(sk, 0, in[2] - 1);
        }
        for (Index ch = 0; ch < c; ++ch) out(i, j, k, ch) = v(si, sj, sk, ch);
      }
  return out;
}

LabelVolume pad(const LabelVolume& v, const Index3& before, const Index3& after) {
  Index3 out_shape;
  for (int a = 0; a < 3; ++a) {
    if (before[a] < 0 || after[a] < 0) throw ArgumentError("pad: negative pad width");
    out_shape[a] = v.shape[a] + before[a] + after[a];
  }
  LabelVolume out(out_shape, v.num_classes, v.spacing);
  for (Index i = 0; i < v.shape[0]; ++i)
    for (Index j = 0; j < v.shape[1]; ++j)
      for (Index k = 0; k < v.shape[2]; ++k) out(i + before[0], j + before[1], k + before[2]) = v(i, j, k);
  return out;
}

namespace {

Index3 flipped(Index3 p, const Index3& shape, int axis) {
  p[axis] = shape[axis] - 1 - p[axis];
  return p;
}

}  // namespace

template <typename Scalar>
Volume4<Scalar> flip(const Volume4<Scalar>& v, int axis) {
  if (axis < 0 || axis > 2) throw ArgumentError("flip: axis must be 0, 1 or 2");
  Volume4<Scalar> out(v.shape(), v.spacing());
  const auto s = v.spatial();
  const Index c = v.channels();
  for (Index i = 0; i < s[0]; ++i)
    for (Index j = 0; j < s[1]; ++j)
      for (Index k = 0; k < s[2]; ++k) {
        const auto q = flipped({i, j, k}, s, axis);
        for (Index ch = 0; ch < c; ++ch) out(q[0], q[1], q[2], ch) = v(i, j, k, ch);
      }
  return out;
}

LabelVolume flip(const LabelVolume& v, int axis) {
  if (axis < 0 || axis > 2) throw ArgumentError("flip: axis must be 0, 1 or 2");
  LabelVolume out(v.shape, v.num_classes, v.spacing);
  for (Index i = 0; i < v.shape[0]; ++i)
    for (Index j = 0; j < v.shape[1]; ++j)
      for (Index k = 0; k < v.shape[2]; ++k) {
        const auto q = flipped({i, j, k}, v.shape, axis);
        out(q[0], q[1], q[2]) = v(i, j, k);
      }
  return out;
}

#define NEUNET_INSTANTIATE(S)                                                                           \
  template class Volume4<S>;                                                                            \
  template Volume4<S> concat_channels(const std::vector<Volume4<S>>&);                                  \
  template Volume4<S> slice_channels(const Volume4<S>&, Index, Index);                                  \
  template std::pair<Volume4<S>, BoundingBox> crop_to_nonzero(const Volume4<S>&);                       \
  template Volume4<S> crop(const Volume4<S>&, const BoundingBox&);                                      \
  template Volume4<S> resample(const Volume4<S>&, const Spacing3&, Interp);                             \
  template Volume4<S> pad(const Volume4<S>&, const Index3&, const Index3&, PadMode);                    \
  template Volume4<S> flip(const Volume4<S>&, int);

NEUNET_INSTANTIATE(float)
NEUNET_INSTANTIATE(double)

}  // namespace neunet
