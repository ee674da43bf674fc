#pragma once

#include <random>
#include <vector>

#include "neunet/volume.hpp"

namespace neunet {

/// Kernel extent, stride and symmetric zero padding per spatial axis.
struct ConvGeometry {
  Index3 ksize{3, 3, 3};
  Index3 stride{1, 1, 1};
  Index3 pad{1, 1, 1};

  Index taps() const { return ksize[0] * ksize[1] * ksize[2]; }

  /// floor((in + 2 pad - k) / stride) + 1 per axis.
  Index3 conv_output(const Index3& in) const;
  /// (in - 1) stride + k - 2 pad per axis.
  Index3 transposed_output(const Index3& in) const;

  /// Odd kernel with pad k/2 ("same" at stride 1).
  static ConvGeometry same(const Index3& ksize, const Index3& stride = {1, 1, 1});

  bool operator==(const ConvGeometry&) const = default;
};

/// 3D convolution kernel. Logically (out_C, in_C, k1, k2, k3); stored
/// tap-major as a (k1, k2, k3, in_C * out_C) volume so that the buffer is the
/// row-major (taps * in_C) x out_C GEMM operand.
template <typename Scalar>
struct ConvKernel {
  ConvGeometry geometry;
  Index in_channels = 0;
  Index out_channels = 0;
  Volume4<Scalar> weights;
  Volume4<Scalar> bias;  // (1, 1, 1, out_C)

  ConvKernel() = default;
  ConvKernel(Index in, Index out, const ConvGeometry& g);

  Scalar& w(Index o, Index i, Index a, Index b, Index c) { return weights.data()[weight_offset(o, i, a, b, c)]; }
  Scalar w(Index o, Index i, Index a, Index b, Index c) const { return weights.data()[weight_offset(o, i, a, b, c)]; }
  Index weight_offset(Index o, Index i, Index a, Index b, Index c) const {
    return (((a * geometry.ksize[1] + b) * geometry.ksize[2] + c) * in_channels + i) * out_channels + o;
  }

  /// Kaiming fan-in normal with the leaky-ReLU gain, zero bias.
  void init_kaiming(std::mt19937_64& rng, double negative_slope = 0.01);
};

/// Weight volume shape for a kernel with the given channels and geometry.
Shape4 kernel_shape(Index in, Index out, const ConvGeometry& g);

// ---------------------------------------------------------------------------
// Raw kernels shared by the forward ops and their backward rules.

/// Rows = output voxels, columns = (tap, input channel).
template <typename Scalar>
void im2col(const Volume4<Scalar>& x, const ConvGeometry& g, const Index3& out, RowMatrix<Scalar>& cols);

/// Scatter-add of im2col columns back onto a volume of spatial shape `in`.
template <typename Scalar>
Volume4<Scalar> col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, const Index3& in, Index channels,
                       const Index3& out, const Spacing3& spacing);

/// Cross-correlation given raw weights ((taps * in) x out) and bias (may be empty).
template <typename Scalar>
Volume4<Scalar> conv3d_raw(const Volume4<Scalar>& x, const Volume4<Scalar>& weights, const Volume4<Scalar>* bias,
                           const ConvGeometry& g, Index out_channels);

/// Adjoint of conv3d_raw with respect to its input, producing spatial `out`.
template <typename Scalar>
Volume4<Scalar> conv3d_adjoint(const Volume4<Scalar>& y, const Volume4<Scalar>& weights, const ConvGeometry& g,
                               Index in_channels, const Index3& out, const Spacing3& spacing);

/// d<conv3d(x, W), g>/dW as a weight-shaped volume.
template <typename Scalar>
Volume4<Scalar> conv3d_weight_grad(const Volume4<Scalar>& x, const Volume4<Scalar>& grad_out, const ConvGeometry& g,
                                   const Shape4& weight_shape);

// ---------------------------------------------------------------------------

template <typename Scalar>
Volume4<Scalar> conv3d(const Volume4<Scalar>& x, const ConvKernel<Scalar>& k);

/// Transposed convolution: the adjoint of conv3d(., k). The input carries
/// k.out_channels channels and the result k.in_channels; kernel bias is not
/// applied (its length belongs to the forward direction). Optional `bias`
/// must have k.in_channels entries.
template <typename Scalar>
Volume4<Scalar> transposed_conv3d(const Volume4<Scalar>& x, const ConvKernel<Scalar>& k,
                                  const Volume4<Scalar>* bias = nullptr);

/// Per-axis upscale factors for periodic shuffling.
struct ShuffleFactors {
  Index3 r{2, 2, 2};
  Index product() const { return r[0] * r[1] * r[2]; }
  bool operator==(const ShuffleFactors&) const = default;
};

/// (H, W, D, C) -> (H r1, W r2, D r3, C / r). Output (r1 i + a, r2 j + b, r3 k + c, ch)
/// reads input channel ch r + a r2 r3 + b r3 + c.
template <typename Scalar>
Volume4<Scalar> pixel_shuffle(const Volume4<Scalar>& x, const ShuffleFactors& f);

template <typename Scalar>
Volume4<Scalar> pixel_unshuffle(const Volume4<Scalar>& x, const ShuffleFactors& f);

/// ICNR initialisation for a convolution feeding pixel_shuffle: one Kaiming
/// sub-kernel per shuffled output channel, copied to all of its r phases, so
/// a constant input upsamples without phase differences. `weights` is a
/// tap-major (k1, k2, k3, in * out) volume with out divisible by r.
template <typename Scalar>
void fill_icnr(Volume4<Scalar>& weights, Index in, Index out, const ShuffleFactors& f, std::mt19937_64& rng,
               double negative_slope = 0.01);

/// Phase sub-kernels of a strided transposed convolution. Running `phases`
/// as a stride-1 convolution and shuffling by `shuffle` reproduces
/// transposed_conv3d after cropping `crop_offset` voxels from the start.
template <typename Scalar>
struct TransposedDecomposition {
  ConvKernel<Scalar> phases;
  ShuffleFactors shuffle;
  Index3 crop_offset{0, 0, 0};
  Index3 taps_per_phase{1, 1, 1};

  Index count() const { return shuffle.product(); }
};

template <typename Scalar>
TransposedDecomposition<Scalar> decompose_transposed(const ConvKernel<Scalar>& k);

/// Evaluates a transposed convolution via its phase decomposition.
template <typename Scalar>
Volume4<Scalar> transposed_via_phases(const Volume4<Scalar>& x, const TransposedDecomposition<Scalar>& d,
                                      const ConvGeometry& original);

template <typename Scalar>
struct InstanceNormStats {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std;
};

/// Per-channel standardisation over the spatial axes followed by gamma * x + beta.
/// gamma and beta are (1, 1, 1, C).
template <typename Scalar>
Volume4<Scalar> instance_norm(const Volume4<Scalar>& x, const Volume4<Scalar>& gamma, const Volume4<Scalar>& beta,
                              Scalar eps = Scalar(1e-5), InstanceNormStats<Scalar>* stats = nullptr);

template <typename Scalar>
Volume4<Scalar> leaky_relu(const Volume4<Scalar>& x, Scalar slope = Scalar(0.01));

template <typename Scalar>
Volume4<Scalar> tanh_act(const Volume4<Scalar>& x);

/// Softmax over the channel axis of every voxel.
template <typename Scalar>
Volume4<Scalar> softmax_channels(const Volume4<Scalar>& x);

template <typename Scalar>
Volume4<Scalar> log_softmax_channels(const Volume4<Scalar>& x);

/// Parameters of the sub-pixel upsampling block: a 5x5x5 conv C -> 2C and a
/// 3x3x3 conv 2C -> r * out_C, both stride 1 with "same" padding.
template <typename Scalar>
struct SubpixelParams {
  ConvKernel<Scalar> expand;
  ConvKernel<Scalar> project;

  SubpixelParams() = default;
  SubpixelParams(Index in_channels, Index out_channels, const ShuffleFactors& f);
};

/// pixel_shuffle(leaky_relu(conv3x3(tanh(conv5x5(x))))).
template <typename Scalar>
Volume4<Scalar> subpixel_block(const Volume4<Scalar>& x, Index out_channels, const ShuffleFactors& f,
                               const SubpixelParams<Scalar>& params);

/// (max phase mean |y| - min phase mean |y|) / (mean |y| + eps) over the r
/// phase sub-lattices of y. Zero for a constant volume.
template <typename Scalar>
double checkerboard_metric(const Volume4<Scalar>& y, const ShuffleFactors& f);

}  // namespace neunet
