#pragma once

#include <cstdint>

#include "neunet/nn_ops.hpp"

namespace neunet {

struct CheckerboardTrial {
  std::uint64_t seed = 0;
  double transposed = 0.0;  // phase imbalance of the transposed-conv output
  double subpixel = 0.0;    // phase imbalance of the sub-pixel block output
};

/// One seeded comparison on a constant input of `extent` voxels per axis with
/// `channels` channels. The transposed conv gets Kaiming weights, the
/// sub-pixel block Kaiming for its 5x5x5 conv and ICNR for the projection;
/// biases are zero. Both outputs are cropped to the region unaffected by zero padding,
/// aligned to the phase lattice.
CheckerboardTrial checkerboard_trial(std::uint64_t seed, Index kernel, Index stride, Index channels = 8,
                                     Index extent = 12);

}  // namespace neunet
