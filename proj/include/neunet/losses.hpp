#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "neunet/autograd.hpp"
#include "neunet/volume.hpp"

namespace neunet {

/// Deep-supervision weights: w_i = 2^-(i-1) / sum_{m=0}^{5} 2^-m for the five
/// decoder heads, head 1 being full resolution. The normaliser has six terms
/// for five losses, so the weights sum to 62/63.
struct DeepSupWeights {
  static constexpr int heads = 5;

  struct Rational {
    std::int64_t num;
    std::int64_t den;
    bool operator==(const Rational&) const = default;
  };

  static std::array<Rational, heads> rational();
  static std::array<double, heads> values();
};

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbabilityFloor = 1e-7;

/// One-hot (H, W, D, num_classes) encoding of a label map.
template <typename Scalar>
Volume4<Scalar> one_hot(const LabelVolume& labels);

/// 1 - (2 sum g s + smooth) / (sum g + sum s + smooth), summing classes and
/// voxels jointly.
template <typename Scalar>
double dice_loss(const Volume4<Scalar>& probs, const Volume4<Scalar>& onehot, double smooth = kDiceSmooth);

/// -(1/N) sum_c sum_i g log max(s, floor), N = voxel count.
template <typename Scalar>
double ce_loss(const Volume4<Scalar>& probs, const Volume4<Scalar>& onehot, double floor = kProbabilityFloor);

/// Weighted sum of per-head (dice + CE) on per-head probability volumes.
/// Labels are reduced to each head's grid by nearest neighbour.
template <typename Scalar>
double total_loss(const std::vector<Volume4<Scalar>>& head_probs, const LabelVolume& label);

namespace ag {

template <typename Scalar>
Var<Scalar> dice_loss(Var<Scalar> probs, const Volume4<Scalar>& onehot, double smooth = kDiceSmooth);

template <typename Scalar>
Var<Scalar> ce_loss(Var<Scalar> probs, const Volume4<Scalar>& onehot, double floor = kProbabilityFloor);

/// Cross entropy evaluated from log-probabilities; equals ce_loss whenever
/// every true-class probability is above the floor.
template <typename Scalar>
Var<Scalar> ce_from_log_probs(Var<Scalar> log_probs, const Volume4<Scalar>& onehot);

/// Deep-supervised training loss on raw head logits (head 0 = full resolution).
template <typename Scalar>
Var<Scalar> total_loss(const std::vector<Var<Scalar>>& head_logits, const LabelVolume& label);

}  // namespace ag

}  // namespace neunet
