#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neunet/autograd.hpp"
#include "neunet/kv.hpp"
#include "neunet/wavelet.hpp"

namespace neunet {

/// Architecture hyper-parameters. Six stages (five encoder stages plus the
/// bottleneck); stage t >= 1 downsamples by stride_schedule[t - 1].
struct NetConfig {
  static constexpr int kLayers = 6;

  int num_layers = kLayers;
  std::vector<Index3> stride_schedule;  // 5 entries from {(2,2,2), (1,2,2)}
  std::vector<Index3> kernel_schedule;  // 6 entries from {3x3x3, 1x3x3}
  Index in_channels = 1;
  Index base_channels = 32;
  Index channel_cap = 320;
  Index num_classes = 2;
  std::vector<Index> wavelet_branch_channels;  // 5 entries, stages 1..5
  /// When false the wavelet branch output is replaced by zeros (ablation).
  bool wavelet_branch = true;

  /// Derives kernels (1x3x3 wherever the stride is (1,2,2); stage 0 follows
  /// stage 1), channel widths and wavelet branch widths.
  static NetConfig make(const std::vector<Index3>& strides, Index base_channels, Index channel_cap,
                        Index num_classes, Index in_channels = 1);
  /// base 8, cap 64, 3 classes, isotropic (2,2,2) strides.
  static NetConfig desk();

  Index stage_channels(int stage) const;
  Index3 cumulative_stride(int stage) const;
  void validate() const;

  void to_kv(KeyValues& kv, const std::string& prefix = "net.") const;
  static NetConfig from_kv(const KeyValues& kv, const std::string& prefix = "net.");
};

/// neU-Net style encoder-decoder: wavelet-pyramid inputs fused into every
/// encoder stage, sub-pixel upsampling in the decoder and one segmentation
/// head per decoder stage.
template <typename Scalar>
class Network {
 public:
  explicit Network(NetConfig config);

  const NetConfig& config() const { return config_; }
  std::vector<ag::Parameter<Scalar>>& parameters() { return params_; }
  const std::vector<ag::Parameter<Scalar>>& parameters() const { return params_; }
  std::size_t parameter_index(const std::string& name) const;
  Index parameter_count() const;

  void init(std::uint64_t seed);
  void zero_parameters();

  /// Leaf nodes for every parameter, in parameter order.
  std::vector<ag::Var<Scalar>> bind(ag::Tape<Scalar>& tape, bool requires_grad) const;

  struct Trace {
    std::vector<ag::Var<Scalar>> heads;    // 5 logit volumes, index 0 = full resolution
    std::vector<ag::Var<Scalar>> encoder;  // 6 stage outputs
  };

  /// Records a forward pass. `bound` must come from bind() on the same tape.
  Trace forward(ag::Tape<Scalar>& tape, const std::vector<ag::Var<Scalar>>& bound, const Volume4<Scalar>& image) const;

  /// Value-only forward: 5 class-logit volumes, index 0 = full resolution.
  std::vector<Volume4<Scalar>> forward(const Volume4<Scalar>& image) const;

  /// Throws DimensionError when the spatial shape is not divisible by the
  /// cumulative stride or the channel count is wrong.
  void check_input(const Volume4<Scalar>& image) const;

 private:
  struct Unit {
    std::size_t w, b, gamma, beta;
    ConvGeometry geometry;
  };
  struct Stage {
    std::vector<Unit> units;
    std::optional<Unit> wavelet;
  };
  struct DecoderStage {
    std::size_t expand_w, expand_b, project_w, project_b;
    ShuffleFactors factors;
    std::vector<Unit> units;
    std::size_t head_w, head_b;
  };

  std::size_t add_param(const std::string& name, const Shape4& shape);
  Unit add_unit(const std::string& prefix, Index in, Index out, const ConvGeometry& g);
  ag::Var<Scalar> run_unit(const Unit& u, ag::Var<Scalar> x, const std::vector<ag::Var<Scalar>>& p) const;
  /// Pyramid level t rescaled by 2^(-n/2) per transformed axis so the
  /// approximation band stays on the intensity scale of the input.
  Volume4<Scalar> band_input(const Volume4<Scalar>& stacked, int t) const;

  NetConfig config_;
  std::vector<ag::Parameter<Scalar>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<Stage> encoder_;
  std::vector<DecoderStage> decoder_;  // index t = decoder stage t (0 = full resolution)
};

/// Sliding-window prediction: windows of `patch` voxels stepping by
/// floor(patch * (1 - overlap)), uniform averaging of full-resolution
/// logits, argmax per voxel. Images smaller than a patch are zero-padded
/// and the prediction is cropped back.
template <typename Scalar>
LabelVolume infer(const Network<Scalar>& net, const Volume4<Scalar>& image, const Index3& patch, double overlap);

/// Averaged full-resolution logits used by infer().
template <typename Scalar>
Volume4<Scalar> sliding_window_logits(const Network<Scalar>& net, const Volume4<Scalar>& image, const Index3& patch,
                                      double overlap);

template <typename Scalar>
LabelVolume argmax_channels(const Volume4<Scalar>& logits);

}  // namespace neunet
