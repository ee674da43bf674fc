#include "neunet/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace neunet {

Index3 ConvGeometry::conv_output(const Index3& in) const {
  Index3 out;
  for (int a = 0; a < 3; ++a) {
    const Index span = in[a] + 2 * pad[a] - ksize[a];
    if (stride[a] < 1 || span < 0) {
      throw DimensionError("conv3d: input extent " + to_string(in) + " too small for kernel " + to_string(ksize));
    }
    out[a] = span / stride[a] + 1;
  }
  return out;
}

Index3 ConvGeometry::transposed_output(const Index3& in) const {
  Index3 out;
  for (int a = 0; a < 3; ++a) {
    out[a] = (in[a] - 1) * stride[a] + ksize[a] - 2 * pad[a];
    if (out[a] < 1) throw DimensionError("transposed_conv3d: padding exceeds output extent");
  }
  return out;
}

ConvGeometry ConvGeometry::same(const Index3& ksize, const Index3& stride) {
  ConvGeometry g;
  g.ksize = ksize;
  g.stride = stride;
  for (int a = 0; a < 3; ++a) {
    if (ksize[a] % 2 == 0) throw ArgumentError("'same' padding needs odd kernel extents, got " + to_string(ksize));
    g.pad[a] = ksize[a] / 2;
  }
  return g;
}

Shape4 kernel_shape(Index in, Index out, const ConvGeometry& g) {
  return {g.ksize[0], g.ksize[1], g.ksize[2], in * out};
}

template <typename Scalar>
ConvKernel<Scalar>::ConvKernel(Index in, Index out, const ConvGeometry& g)
    : geometry(g), in_channels(in), out_channels(out), weights(kernel_shape(in, out, g)), bias(Shape4{1, 1, 1, out}) {
  for (int a = 0; a < 3; ++a) {
    if (g.ksize[a] < 1 || g.stride[a] < 1 || g.pad[a] < 0) {
      throw ArgumentError("invalid convolution geometry k=" + to_string(g.ksize) + " s=" + to_string(g.stride));
    }
  }
  if (in < 1 || out < 1) throw ArgumentError("convolution channel counts must be positive");
}

template <typename Scalar>
void ConvKernel<Scalar>::init_kaiming(std::mt19937_64& rng, double negative_slope) {
  const double fan_in = static_cast<double>(in_channels * geometry.taps());
  const double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(fan_in));
  for (Index n = 0; n < weights.size(); ++n) weights.data()[n] = static_cast<Scalar>(dist(rng));
  bias.data().setZero();
}

template <typename Scalar>
void fill_icnr(Volume4<Scalar>& weights, Index in, Index out, const ShuffleFactors& f, std::mt19937_64& rng,
               double negative_slope) {
  const Index r = f.product();
  if (in < 1 || out < 1 || out % r != 0 || weights.channels() != in * out) {
    throw DimensionError("fill_icnr: weights do not hold " + std::to_string(in) + " x " + std::to_string(out) +
                         " channels at r=" + std::to_string(r));
  }
  const Index taps = weights.shape().h * weights.shape().w * weights.shape().d;
  const double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(in * taps)));
  // Output channel o = ch r + phase, so each row of `out` weights is `out / r` runs of r equal values.
  Scalar* w = weights.data().data();
  for (Index row = 0; row < taps * in; ++row) {
    for (Index ch = 0; ch < out / r; ++ch) {
      const auto v = static_cast<Scalar>(dist(rng));
      for (Index phase = 0; phase < r; ++phase) w[row * out + ch * r + phase] = v;
    }
  }
}

template <typename Scalar>
void im2col(const Volume4<Scalar>& x, const ConvGeometry& g, const Index3& out, RowMatrix<Scalar>& cols) {
  const auto in = x.spatial();
  const Index c = x.channels();
  const Index row_len = g.taps() * c;
  cols.resize(out[0] * out[1] * out[2], row_len);
  const Scalar* src = x.data().data();
  Scalar* row = cols.data();
  for (Index oi = 0; oi < out[0]; ++oi) {
    const Index bi = oi * g.stride[0] - g.pad[0];
    for (Index oj = 0; oj < out[1]; ++oj) {
      const Index bj = oj * g.stride[1] - g.pad[1];
      for (Index ok = 0; ok < out[2]; ++ok, row += row_len) {
        const Index bk = ok * g.stride[2] - g.pad[2];
        const Index lo = std::clamp<Index>(-bk, 0, g.ksize[2]);
        const Index hi = std::clamp<Index>(in[2] - bk, lo, g.ksize[2]);
        Scalar* dst = row;
        for (Index a = 0; a < g.ksize[0]; ++a) {
          const Index ii = bi + a;
          if (ii < 0 || ii >= in[0]) {
            std::fill(dst, dst + g.ksize[1] * g.ksize[2] * c, Scalar(0));
            dst += g.ksize[1] * g.ksize[2] * c;
            continue;
          }
          for (Index b = 0; b < g.ksize[1]; ++b, dst += g.ksize[2] * c) {
            const Index jj = bj + b;
            if (jj < 0 || jj >= in[1]) {
              std::fill(dst, dst + g.ksize[2] * c, Scalar(0));
              continue;
            }
            std::fill(dst, dst + lo * c, Scalar(0));
            const Scalar* s = src + ((ii * in[1] + jj) * in[2] + bk + lo) * c;
            std::copy(s, s + (hi - lo) * c, dst + lo * c);
            std::fill(dst + hi * c, dst + g.ksize[2] * c, Scalar(0));
          }
        }
      }
    }
  }
}

template <typename Scalar>
Volume4<Scalar> col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, const Index3& in, Index channels,
                       const Index3& out, const Spacing3& spacing) {
  const Index c = channels;
  const Index row_len = g.taps() * c;
  if (cols.cols() != row_len || cols.rows() != out[0] * out[1] * out[2]) {
    throw DimensionError("col2im: column matrix does not match geometry");
  }
  Volume4<Scalar> x(Shape4::from(in, c), spacing);
  Scalar* dst_base = x.data().data();
  const Scalar* row = cols.data();
  for (Index oi = 0; oi < out[0]; ++oi) {
    const Index bi = oi * g.stride[0] - g.pad[0];
    for (Index oj = 0; oj < out[1]; ++oj) {
      const Index bj = oj * g.stride[1] - g.pad[1];
      for (Index ok = 0; ok < out[2]; ++ok, row += row_len) {
        const Index bk = ok * g.stride[2] - g.pad[2];
        const Index lo = std::clamp<Index>(-bk, 0, g.ksize[2]);
        const Index hi = std::clamp<Index>(in[2] - bk, lo, g.ksize[2]);
        const Scalar* s = row;
        for (Index a = 0; a < g.ksize[0]; ++a) {
          const Index ii = bi + a;
          if (ii < 0 || ii >= in[0]) {
            s += g.ksize[1] * g.ksize[2] * c;
            continue;
          }
          for (Index b = 0; b < g.ksize[1]; ++b, s += g.ksize[2] * c) {
            const Index jj = bj + b;
            if (jj < 0 || jj >= in[1]) continue;
            Scalar* d = dst_base + ((ii * in[1] + jj) * in[2] + bk + lo) * c;
            const Scalar* sp = s + lo * c;
            for (Index n = 0; n < (hi - lo) * c; ++n) d[n] += sp[n];
          }
        }
      }
    }
  }
  return x;
}

namespace {

template <typename Scalar>
bool is_pointwise(const ConvGeometry& g) {
  return g.ksize == Index3{1, 1, 1} && g.stride == Index3{1, 1, 1} && g.pad == Index3{0, 0, 0};
}

Spacing3 scaled_spacing(const Spacing3& s, const Index3& stride, bool up) {
  Spacing3 out;
  for (int a = 0; a < 3; ++a) out[a] = up ? s[a] / static_cast<double>(stride[a]) : s[a] * static_cast<double>(stride[a]);
  return out;
}

template <typename Scalar>
RowMatrix<Scalar>& scratch() {
  thread_local RowMatrix<Scalar> cols;
  return cols;
}

}  // namespace

template <typename Scalar>
Volume4<Scalar> conv3d_raw(const Volume4<Scalar>& x, const Volume4<Scalar>& weights, const Volume4<Scalar>* bias,
                           const ConvGeometry& g, Index out_channels) {
  const Index in_c = x.channels();
  if (weights.size() != g.taps() * in_c * out_channels) {
    throw DimensionError("conv3d: input has " + std::to_string(in_c) + " channels but kernel expects " +
                         std::to_string(weights.size() / std::max<Index>(1, g.taps() * out_channels)));
  }
  const Index3 out = g.conv_output(x.spatial());
  Volume4<Scalar> y(Shape4::from(out, out_channels), scaled_spacing(x.spacing(), g.stride, false));
  Eigen::Map<const RowMatrix<Scalar>> w(weights.data().data(), g.taps() * in_c, out_channels);
  auto ym = y.matrix();
  if (is_pointwise<Scalar>(g)) {
    ym.noalias() = x.matrix() * w;
  } else {
    auto& cols = scratch<Scalar>();
    im2col(x, g, out, cols);
    ym.noalias() = cols * w;
  }
  if (bias) {
    if (bias->size() != out_channels) throw DimensionError("conv3d: bias length does not match output channels");
    ym.rowwise() += bias->matrix().row(0);
  }
  return y;
}

template <typename Scalar>
Volume4<Scalar> conv3d_adjoint(const Volume4<Scalar>& y, const Volume4<Scalar>& weights, const ConvGeometry& g,
                               Index in_channels, const Index3& out, const Spacing3& spacing) {
  const Index out_c = y.channels();
  if (weights.size() != g.taps() * in_channels * out_c) {
    throw DimensionError("transposed conv: input has " + std::to_string(out_c) +
                         " channels, kernel does not match");
  }
  Eigen::Map<const RowMatrix<Scalar>> w(weights.data().data(), g.taps() * in_channels, out_c);
  if (g.conv_output(out) != y.spatial()) {
    throw DimensionError("transposed conv: output extent " + to_string(out) + " incompatible with input " +
                         to_string(y.spatial()));
  }
  if (is_pointwise<Scalar>(g)) {
    Volume4<Scalar> x(Shape4::from(out, in_channels), spacing);
    auto xm = x.matrix();
    xm.noalias() = y.matrix() * w.transpose();
    return x;
  }
  auto& cols = scratch<Scalar>();
  cols.resize(y.voxels(), g.taps() * in_channels);
  cols.noalias() = y.matrix() * w.transpose();
  return col2im(cols, g, out, in_channels, y.spatial(), spacing);
}

template <typename Scalar>
Volume4<Scalar> conv3d_weight_grad(const Volume4<Scalar>& x, const Volume4<Scalar>& grad_out, const ConvGeometry& g,
                                   const Shape4& weight_shape) {
  const Index in_c = x.channels();
  const Index out_c = grad_out.channels();
  Volume4<Scalar> gw(weight_shape);
  Eigen::Map<RowMatrix<Scalar>> gm(gw.data().data(), g.taps() * in_c, out_c);
  if (is_pointwise<Scalar>(g)) {
    gm.noalias() = x.matrix().transpose() * grad_out.matrix();
  } else {
    auto& cols = scratch<Scalar>();
    im2col(x, g, grad_out.spatial(), cols);
    gm.noalias() = cols.transpose() * grad_out.matrix();
  }
  return gw;
}

template <typename Scalar>
Volume4<Scalar> conv3d(const Volume4<Scalar>& x, const ConvKernel<Scalar>& k) {
  if (x.channels() != k.in_channels) {
    throw DimensionError("conv3d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                         std::to_string(k.in_channels));
  }
  return conv3d_raw(x, k.weights, &k.bias, k.geometry, k.out_channels);
}

template <typename Scalar>
Volume4<Scalar> transposed_conv3d(const Volume4<Scalar>& x, const ConvKernel<Scalar>& k, const Volume4<Scalar>* bias) {
  if (x.channels() != k.out_channels) {
    throw DimensionError("transposed_conv3d: input has " + std::to_string(x.channels()) +
                         " channels, kernel expects " + std::to_string(k.out_channels));
  }
  const Index3 out = k.geometry.transposed_output(x.spatial());
  auto y = conv3d_adjoint(x, k.weights, k.geometry, k.in_channels, out, scaled_spacing(x.spacing(), k.geometry.stride, true));
  if (bias) {
    if (bias->size() != k.in_channels) throw DimensionError("transposed_conv3d: bias length mismatch");
    y.matrix().rowwise() += bias->matrix().row(0);
  }
  return y;
}

template <typename Scalar>
Volume4<Scalar> pixel_shuffle(const Volume4<Scalar>& x, const ShuffleFactors& f) {
  const Index r = f.product();
  if (r < 1 || f.r[0] < 1 || f.r[1] < 1 || f.r[2] < 1) throw ArgumentError("shuffle factors must be >= 1");
  if (x.channels() % r != 0) {
    throw DimensionError("pixel_shuffle: " + std::to_string(x.channels()) + " channels not divisible by r=" +
                         std::to_string(r));
  }
  const auto in = x.spatial();
  const Index oc = x.channels() / r;
  Spacing3 spacing;
  for (int a = 0; a < 3; ++a) spacing[a] = x.spacing()[a] / static_cast<double>(f.r[a]);
  Volume4<Scalar> y(Shape4{in[0] * f.r[0], in[1] * f.r[1], in[2] * f.r[2], oc}, spacing);
  for (Index i = 0; i < in[0]; ++i)
    for (Index j = 0; j < in[1]; ++j)
      for (Index k = 0; k < in[2]; ++k) {
        const Scalar* src = &x.data()[x.offset(i, j, k)];
        for (Index a = 0; a < f.r[0]; ++a)
          for (Index b = 0; b < f.r[1]; ++b)
            for (Index c = 0; c < f.r[2]; ++c) {
              const Index phase = (a * f.r[1] + b) * f.r[2] + c;
              Scalar* dst = &y.data()[y.offset(i * f.r[0] + a, j * f.r[1] + b, k * f.r[2] + c)];
              for (Index ch = 0; ch < oc; ++ch) dst[ch] = src[ch * r + phase];
            }
      }
  return y;
}

template <typename Scalar>
Volume4<Scalar> pixel_unshuffle(const Volume4<Scalar>& y, const ShuffleFactors& f) {
  const Index r = f.product();
  if (r < 1 || f.r[0] < 1 || f.r[1] < 1 || f.r[2] < 1) throw ArgumentError("shuffle factors must be >= 1");
  const auto out = y.spatial();
  for (int a = 0; a < 3; ++a) {
    if (out[a] % f.r[a] != 0) {
      throw DimensionError("pixel_unshuffle: extent " + to_string(out) + " not divisible by factors " +
                           to_string(f.r));
    }
  }
  const Index3 in{out[0] / f.r[0], out[1] / f.r[1], out[2] / f.r[2]};
  const Index oc = y.channels();
  Spacing3 spacing;
  for (int a = 0; a < 3; ++a) spacing[a] = y.spacing()[a] * static_cast<double>(f.r[a]);
  Volume4<Scalar> x(Shape4::from(in, oc * r), spacing);
  for (Index i = 0; i < in[0]; ++i)
    for (Index j = 0; j < in[1]; ++j)
      for (Index k = 0; k < in[2]; ++k) {
        Scalar* dst = &x.data()[x.offset(i, j, k)];
        for (Index a = 0; a < f.r[0]; ++a)
          for (Index b = 0; b < f.r[1]; ++b)
            for (Index c = 0; c < f.r[2]; ++c) {
              const Index phase = (a * f.r[1] + b) * f.r[2] + c;
              const Scalar* src = &y.data()[y.offset(i * f.r[0] + a, j * f.r[1] + b, k * f.r[2] + c)];
              for (Index ch = 0; ch < oc; ++ch) dst[ch * r + phase] = src[ch];
            }
      }
  return x;
}

template <typename Scalar>
TransposedDecomposition<Scalar> decompose_transposed(const ConvKernel<Scalar>& k) {
  const auto& g = k.geometry;
  TransposedDecomposition<Scalar> d;
  for (int a = 0; a < 3; ++a) {
    if (g.stride[a] > g.ksize[a]) {
      throw ArgumentError("decompose_transposed: stride " + to_string(g.stride) + " exceeds kernel " +
                          to_string(g.ksize));
    }
    d.taps_per_phase[a] = (g.ksize[a] + g.stride[a] - 1) / g.stride[a];
    d.crop_offset[a] = g.pad[a];
  }
  d.shuffle.r = g.stride;
  const Index r = d.shuffle.product();
  const Index3 t = d.taps_per_phase;
  ConvGeometry pg;
  pg.ksize = t;
  pg.stride = {1, 1, 1};
  pg.pad = {t[0] - 1, t[1] - 1, t[2] - 1};
  // The transposed op reads k.out_channels and writes k.in_channels.
  d.phases = ConvKernel<Scalar>(k.out_channels, k.in_channels * r, pg);

  for (Index pa = 0; pa < g.stride[0]; ++pa)
    for (Index pb = 0; pb < g.stride[1]; ++pb)
      for (Index pc = 0; pc < g.stride[2]; ++pc) {
        const Index phase = (pa * g.stride[1] + pb) * g.stride[2] + pc;
        for (Index la = 0; la < t[0]; ++la)
          for (Index lb = 0; lb < t[1]; ++lb)
            for (Index lc = 0; lc < t[2]; ++lc) {
              const Index ta = pa + (t[0] - 1 - la) * g.stride[0];
              const Index tb = pb + (t[1] - 1 - lb) * g.stride[1];
              const Index tc = pc + (t[2] - 1 - lc) * g.stride[2];
              if (ta >= g.ksize[0] || tb >= g.ksize[1] || tc >= g.ksize[2]) continue;
              for (Index oc = 0; oc < k.out_channels; ++oc)
                for (Index ic = 0; ic < k.in_channels; ++ic) {
                  d.phases.w(ic * r + phase, oc, la, lb, lc) = k.w(oc, ic, ta, tb, tc);
                }
            }
      }
  return d;
}

template <typename Scalar>
Volume4<Scalar> transposed_via_phases(const Volume4<Scalar>& x, const TransposedDecomposition<Scalar>& d,
                                      const ConvGeometry& original) {
  const auto full = pixel_shuffle(conv3d(x, d.phases), d.shuffle);
  const Index3 out = original.transposed_output(x.spatial());
  auto y = crop(full, BoundingBox{d.crop_offset, out});
  y.set_spacing(scaled_spacing(x.spacing(), original.stride, true));
  return y;
}

template <typename Scalar>
Volume4<Scalar> instance_norm(const Volume4<Scalar>& x, const Volume4<Scalar>& gamma, const Volume4<Scalar>& beta,
                              Scalar eps, InstanceNormStats<Scalar>* stats) {
  const Index c = x.channels();
  if (gamma.size() != c || beta.size() != c) {
    throw DimensionError("instance_norm: gamma/beta length must equal channel count " + std::to_string(c));
  }
  const Index n = x.voxels();
  const auto xm = x.matrix();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mean(c), inv_std(c);
  for (Index ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (Index v = 0; v < n; ++v) s += static_cast<double>(xm(v, ch));
    const double mu = s / static_cast<double>(n);
    double ss = 0.0;
    for (Index v = 0; v < n; ++v) {
      const double dv = static_cast<double>(xm(v, ch)) - mu;
      ss += dv * dv;
    }
    mean[ch] = static_cast<Scalar>(mu);
    inv_std[ch] = static_cast<Scalar>(1.0 / std::sqrt(ss / static_cast<double>(n) + static_cast<double>(eps)));
  }
  Volume4<Scalar> y(x.shape(), x.spacing());
  auto ym = y.matrix();
  const auto scale = (inv_std * gamma.data()).matrix().transpose().eval();
  const auto shift = (beta.data() - mean * inv_std * gamma.data()).matrix().transpose().eval();
  ym = (xm.array().rowwise() * scale.array()).rowwise() + shift.array();
  if (stats) *stats = {std::move(mean), std::move(inv_std)};
  return y;
}

template <typename Scalar>
Volume4<Scalar> leaky_relu(const Volume4<Scalar>& x, Scalar slope) {
  Volume4<Scalar> y(x.shape(), x.spacing());
  y.data() = (x.data() > Scalar(0)).select(x.data(), x.data() * slope);
  return y;
}

template <typename Scalar>
Volume4<Scalar> tanh_act(const Volume4<Scalar>& x) {
  Volume4<Scalar> y(x.shape(), x.spacing());
  y.data() = x.data().tanh();
  return y;
}

template <typename Scalar>
Volume4<Scalar> softmax_channels(const Volume4<Scalar>& x) {
  Volume4<Scalar> y(x.shape(), x.spacing());
  const auto xm = x.matrix();
  auto ym = y.matrix();
  for (Index v = 0; v < x.voxels(); ++v) {
    const Scalar mx = xm.row(v).maxCoeff();
    ym.row(v) = (xm.row(v).array() - mx).exp().matrix();
    ym.row(v) /= ym.row(v).sum();
  }
  return y;
}

template <typename Scalar>
Volume4<Scalar> log_softmax_channels(const Volume4<Scalar>& x) {
  Volume4<Scalar> y(x.shape(), x.spacing());
  const auto xm = x.matrix();
  auto ym = y.matrix();
  for (Index v = 0; v < x.voxels(); ++v) {
    const Scalar mx = xm.row(v).maxCoeff();
    const Scalar lse = mx + std::log((xm.row(v).array() - mx).exp().sum());
    ym.row(v) = (xm.row(v).array() - lse).matrix();
  }
  return y;
}

template <typename Scalar>
SubpixelParams<Scalar>::SubpixelParams(Index in_channels, Index out_channels, const ShuffleFactors& f)
    : expand(in_channels, 2 * in_channels, ConvGeometry::same({5, 5, 5})),
      project(2 * in_channels, f.product() * out_channels, ConvGeometry::same({3, 3, 3})) {}

template <typename Scalar>
Volume4<Scalar> subpixel_block(const Volume4<Scalar>& x, Index out_channels, const ShuffleFactors& f,
                               const SubpixelParams<Scalar>& params) {
  if (params.expand.in_channels != x.channels() || params.expand.out_channels != 2 * x.channels() ||
      params.project.in_channels != params.expand.out_channels ||
      params.project.out_channels != f.product() * out_channels) {
    throw DimensionError("subpixel_block: parameters do not match " + std::to_string(x.channels()) + " -> " +
                         std::to_string(out_channels) + " channels at r=" + std::to_string(f.product()));
  }
  const auto h = tanh_act(conv3d(x, params.expand));
  return pixel_shuffle(leaky_relu(conv3d(h, params.project)), f);
}

template <typename Scalar>
double checkerboard_metric(const Volume4<Scalar>& y, const ShuffleFactors& f) {
  const auto s = y.spatial();
  for (int a = 0; a < 3; ++a) {
    if (f.r[a] < 1 || s[a] % f.r[a] != 0) {
      throw DimensionError("checkerboard_metric: extent " + to_string(s) + " not divisible by " + to_string(f.r));
    }
  }
  const Index r = f.product();
  std::vector<double> sum(static_cast<std::size_t>(r), 0.0);
  std::vector<Index> count(static_cast<std::size_t>(r), 0);
  const Index c = y.channels();
  double total = 0.0;
  for (Index i = 0; i < s[0]; ++i)
    for (Index j = 0; j < s[1]; ++j)
      for (Index k = 0; k < s[2]; ++k) {
        const auto phase = static_cast<std::size_t>(((i % f.r[0]) * f.r[1] + j % f.r[1]) * f.r[2] + k % f.r[2]);
        for (Index ch = 0; ch < c; ++ch) {
          const double m = std::abs(static_cast<double>(y(i, j, k, ch)));
          sum[phase] += m;
          total += m;
        }
        count[phase] += c;
      }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t p = 0; p < sum.size(); ++p) {
    const double mean = sum[p] / static_cast<double>(count[p]);
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  constexpr double eps = 1e-12;
  return (hi - lo) / (total / static_cast<double>(y.size()) + eps);
}

#define NEUNET_INSTANTIATE(S)                                                                                   \
  template struct ConvKernel<S>;                                                                                \
  template void fill_icnr(Volume4<S>&, Index, Index, const ShuffleFactors&, std::mt19937_64&, double); \
  template struct SubpixelParams<S>;                                                                            \
  template void im2col(const Volume4<S>&, const ConvGeometry&, const Index3&, RowMatrix<S>&);                   \
  template Volume4<S> col2im(const RowMatrix<S>&, const ConvGeometry&, const Index3&, Index, const Index3&,     \
                             const Spacing3&);                                                                  \
  template Volume4<S> conv3d_raw(const Volume4<S>&, const Volume4<S>&, const Volume4<S>*, const ConvGeometry&, \
                                 Index);                                                                        \
  template Volume4<S> conv3d_adjoint(const Volume4<S>&, const Volume4<S>&, const ConvGeometry&, Index,          \
                                     const Index3&, const Spacing3&);                                           \
  template Volume4<S> conv3d_weight_grad(const Volume4<S>&, const Volume4<S>&, const ConvGeometry&,             \
                                         const Shape4&);                                                        \
  template Volume4<S> conv3d(const Volume4<S>&, const ConvKernel<S>&);                                          \
  template Volume4<S> transposed_conv3d(const Volume4<S>&, const ConvKernel<S>&, const Volume4<S>*);            \
  template Volume4<S> pixel_shuffle(const Volume4<S>&, const ShuffleFactors&);                                  \
  template Volume4<S> pixel_unshuffle(const Volume4<S>&, const ShuffleFactors&);                                \
  template TransposedDecomposition<S> decompose_transposed(const ConvKernel<S>&);                               \
  template Volume4<S> transposed_via_phases(const Volume4<S>&, const TransposedDecomposition<S>&,               \
                                            const ConvGeometry&);                                               \
  template Volume4<S> instance_norm(const Volume4<S>&, const Volume4<S>&, const Volume4<S>&, S,                 \
                                    InstanceNormStats<S>*);                                                     \
  template Volume4<S> leaky_relu(const Volume4<S>&, S);                                                         \
  template Volume4<S> tanh_act(const Volume4<S>&);                                                              \
  template Volume4<S> softmax_channels(const Volume4<S>&);                                                      \
  template Volume4<S> log_softmax_channels(const Volume4<S>&);                                                  \
  template Volume4<S> subpixel_block(const Volume4<S>&, Index, const ShuffleFactors&, const SubpixelParams<S>&); \
  template double checkerboard_metric(const Volume4<S>&, const ShuffleFactors&);

NEUNET_INSTANTIATE(float)
NEUNET_INSTANTIATE(double)

}  // namespace neunet
