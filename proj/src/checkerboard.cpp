#include "neunet/checkerboard.hpp"

#include <random>

namespace neunet {

namespace {

// Largest phase-aligned window inside [lo, hi].
BoundingBox aligned_window(Index lo, Index hi, Index stride) {
  const Index start = (lo + stride - 1) / stride * stride;
  const Index length = (hi + 1 - start) / stride * stride;
  if (length <= 0) throw ArgumentError("checkerboard: input too small for an interior window");
  return {{start, start, start}, {length, length, length}};
}

}  // namespace

CheckerboardTrial checkerboard_trial(std::uint64_t seed, Index kernel, Index stride, Index channels, Index extent) {
  if (kernel < 1 || stride < 1 || channels < 1) throw ArgumentError("checkerboard: kernel, stride and channels must be positive");
  std::mt19937_64 rng(seed);
  const Shape4 shape{extent, extent, extent, channels};
  const auto input = Volume4<double>::constant(shape, 1.0);
  const ShuffleFactors f{{stride, stride, stride}};

  CheckerboardTrial t;
  t.seed = seed;

  // Output o sees every tap only when (o - a) / stride is a valid input index
  // for all a < kernel: o in [kernel - 1, (extent - 1) stride].
  ConvKernel<double> k(channels, channels, ConvGeometry{{kernel, kernel, kernel}, {stride, stride, stride}, {0, 0, 0}});
  k.init_kaiming(rng);
  const auto y = transposed_conv3d(input, k);
  t.transposed = checkerboard_metric(crop(y, aligned_window(kernel - 1, (extent - 1) * stride, stride)), f);

  // 5x5x5 then 3x3x3 "same" convs reach 3 low-resolution voxels into the padding.
  SubpixelParams<double> p(channels, channels, f);
  p.expand.init_kaiming(rng);
  fill_icnr(p.project.weights, p.project.in_channels, p.project.out_channels, f, rng);
  p.project.bias.data().setZero();
  const auto z = subpixel_block(input, channels, f, p);
  t.subpixel = checkerboard_metric(crop(z, aligned_window(3 * stride, (extent - 3) * stride - 1, stride)), f);
  return t;
}

}  // namespace neunet
