#include "neunet/wavelet.hpp"

namespace neunet {

template <typename Scalar>
Dwt1dResult<Scalar> dwt1d(const Signal<Scalar>& x) {
  const Index n = x.size();
  if (n < 2 || n % 2 != 0) {
    throw ArgumentError("dwt1d: length " + std::to_string(n) + " is not even; pad the signal first");
  }
  const auto s = static_cast<Scalar>(HaarFilters::inv_sqrt2);
  Dwt1dResult<Scalar> r{Signal<Scalar>(n / 2), Signal<Scalar>(n / 2)};
  for (Index k = 0; k < n / 2; ++k) {
    r.approx[k] = (x[2 * k] + x[2 * k + 1]) * s;
    r.detail[k] = (x[2 * k] - x[2 * k + 1]) * s;
  }
  return r;
}

template <typename Scalar>
Signal<Scalar> idwt1d(const Signal<Scalar>& approx, const Signal<Scalar>& detail) {
  if (approx.size() != detail.size()) throw ArgumentError("idwt1d: approximation/detail length mismatch");
  const auto s = static_cast<Scalar>(HaarFilters::inv_sqrt2);
  Signal<Scalar> x(2 * approx.size());
  for (Index k = 0; k < approx.size(); ++k) {
    x[2 * k] = (approx[k] + detail[k]) * s;
    x[2 * k + 1] = (approx[k] - detail[k]) * s;
  }
  return x;
}

namespace {

// Splits v along one spatial axis into low and high halves.
template <typename Scalar>
std::pair<Volume4<Scalar>, Volume4<Scalar>> haar_split(const Volume4<Scalar>& v, int axis) {
  const auto in = v.spatial();
  if (in[axis] % 2 != 0) {
    throw ArgumentError("dwt3d: axis " + std::to_string(axis) + " has odd extent " + std::to_string(in[axis]));
  }
  Index3 half = in;
  half[axis] /= 2;
  Spacing3 spacing = v.spacing();
  spacing[axis] *= 2.0;
  const Index c = v.channels();
  Volume4<Scalar> lo(Shape4::from(half, c), spacing), hi(Shape4::from(half, c), spacing);
  const auto s = static_cast<Scalar>(HaarFilters::inv_sqrt2);
  Index3 step{0, 0, 0};
  step[axis] = 1;
  for (Index i = 0; i < half[0]; ++i)
    for (Index j = 0; j < half[1]; ++j)
      for (Index k = 0; k < half[2]; ++k) {
        Index3 p{i, j, k};
        p[axis] *= 2;
        const Index a = v.offset(p[0], p[1], p[2]);
        const Index b = v.offset(p[0] + step[0], p[1] + step[1], p[2] + step[2]);
        const Index o = lo.offset(i, j, k);
        for (Index ch = 0; ch < c; ++ch) {
          const Scalar x0 = v.data()[a + ch];
          const Scalar x1 = v.data()[b + ch];
          lo.data()[o + ch] = (x0 + x1) * s;
          hi.data()[o + ch] = (x0 - x1) * s;
        }
      }
  return {std::move(lo), std::move(hi)};
}

template <typename Scalar>
Volume4<Scalar> haar_merge(const Volume4<Scalar>& lo, const Volume4<Scalar>& hi, int axis) {
  if (lo.shape() != hi.shape() || lo.spacing() != hi.spacing()) {
    throw ArgumentError("idwt3d: inconsistent band shapes " + to_string(lo.shape()) + " vs " + to_string(hi.shape()));
  }
  const auto half = lo.spatial();
  Index3 full = half;
  full[axis] *= 2;
  Spacing3 spacing = lo.spacing();
  spacing[axis] /= 2.0;
  const Index c = lo.channels();
  Volume4<Scalar> out(Shape4::from(full, c), spacing);
  const auto s = static_cast<Scalar>(HaarFilters::inv_sqrt2);
  Index3 step{0, 0, 0};
  step[axis] = 1;
  for (Index i = 0; i < half[0]; ++i)
    for (Index j = 0; j < half[1]; ++j)
      for (Index k = 0; k < half[2]; ++k) {
        Index3 p{i, j, k};
        p[axis] *= 2;
        const Index a = out.offset(p[0], p[1], p[2]);
        const Index b = out.offset(p[0] + step[0], p[1] + step[1], p[2] + step[2]);
        const Index o = lo.offset(i, j, k);
        for (Index ch = 0; ch < c; ++ch) {
          const Scalar ca = lo.data()[o + ch];
          const Scalar cd = hi.data()[o + ch];
          out.data()[a + ch] = (ca + cd) * s;
          out.data()[b + ch] = (ca - cd) * s;
        }
      }
  return out;
}

}  // namespace

template <typename Scalar>
SubbandSet<Scalar> dwt3d(const Volume4<Scalar>& v, const AxisFlags& flags) {
  for (int a = 0; a < 3; ++a) {
    if (flags[a] && v.spatial()[a] % 2 != 0) {
      throw ArgumentError("dwt3d: flagged axis " + std::to_string(a) + " has odd extent " +
                          std::to_string(v.spatial()[a]));
    }
  }
  SubbandSet<Scalar> out;
  out.axis_flags = flags;
  out.bands.push_back(v);
  for (int a = 0; a < 3; ++a) {
    if (!flags[a]) continue;
    std::vector<Volume4<Scalar>> next;
    next.reserve(out.bands.size() * 2);
    for (const auto& b : out.bands) {
      auto [lo, hi] = haar_split(b, a);
      next.push_back(std::move(lo));
      next.push_back(std::move(hi));
    }
    out.bands = std::move(next);
  }
  return out;
}

template <typename Scalar>
Volume4<Scalar> idwt3d(const SubbandSet<Scalar>& s) {
  const std::size_t expected = std::size_t{1} << s.transformed_axes();
  if (s.bands.size() != expected) {
    throw ArgumentError("idwt3d: expected " + std::to_string(expected) + " bands, got " +
                        std::to_string(s.bands.size()));
  }
  for (const auto& b : s.bands) {
    if (b.shape() != s.bands.front().shape()) throw ArgumentError("idwt3d: inconsistent band shapes");
  }
  std::vector<Volume4<Scalar>> bands = s.bands;
  for (int a = 2; a >= 0; --a) {
    if (!s.axis_flags[a]) continue;
    std::vector<Volume4<Scalar>> merged;
    merged.reserve(bands.size() / 2);
    for (std::size_t b = 0; b < bands.size(); b += 2) merged.push_back(haar_merge(bands[b], bands[b + 1], a));
    bands = std::move(merged);
  }
  return bands.front();
}

AxisFlags flags_from_stride(const Index3& stride) {
  AxisFlags f{};
  for (int a = 0; a < 3; ++a) {
    if (stride[a] != 1 && stride[a] != 2) {
      throw ConfigError("stride " + to_string(stride) + " has a component other than 1 or 2");
    }
    f[a] = stride[a] == 2;
  }
  return f;
}

template <typename Scalar>
WaveletPyramid<Scalar> build_pyramid(const Volume4<Scalar>& input, const std::vector<Index3>& stride_schedule) {
  std::vector<AxisFlags> flags;
  for (const auto& s : stride_schedule) flags.push_back(flags_from_stride(s));

  WaveletPyramid<Scalar> pyramid;
  const Volume4<Scalar>* source = &input;
  for (const auto& f : flags) {
    PyramidLevel<Scalar> level;
    Index3 after{0, 0, 0};
    for (int a = 0; a < 3; ++a) {
      if (f[a] && source->spatial()[a] % 2 != 0) {
        after[a] = 1;
        level.padded[a] = true;
      }
    }
    if (after != Index3{0, 0, 0}) {
      level.subbands = dwt3d(pad(*source, {0, 0, 0}, after, PadMode::edge), f);
    } else {
      level.subbands = dwt3d(*source, f);
    }
    level.stacked = concat_channels(level.subbands.bands);
    pyramid.levels.push_back(std::move(level));
    source = &pyramid.levels.back().subbands.approx();
  }
  return pyramid;
}

#define NEUNET_INSTANTIATE(S)                                                                  \
  template Dwt1dResult<S> dwt1d(const Signal<S>&);                                             \
  template Signal<S> idwt1d(const Signal<S>&, const Signal<S>&);                               \
  template SubbandSet<S> dwt3d(const Volume4<S>&, const AxisFlags&);                           \
  template Volume4<S> idwt3d(const SubbandSet<S>&);                                            \
  template WaveletPyramid<S> build_pyramid(const Volume4<S>&, const std::vector<Index3>&);

NEUNET_INSTANTIATE(float)
NEUNET_INSTANTIATE(double)

}  // namespace neunet
