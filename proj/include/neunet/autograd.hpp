#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neunet/nn_ops.hpp"

namespace neunet::ag {

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Volume4<Scalar>& value() const { return tape->value(id); }
  const Shape4& shape() const { return value().shape(); }
};

/// Reverse-mode record of one forward pass. Nodes are appended in
/// evaluation order, so the node list is already topologically sorted.
template <typename Scalar>
class Tape {
 public:
  /// Receives the node's output gradient and accumulates into its parents.
  using BackwardRule = std::function<void(Tape&, const Volume4<Scalar>& grad_out)>;

  struct Node {
    Volume4<Scalar> value;
    std::vector<std::size_t> parents;
    std::string rule;
    BackwardRule backward;
    std::optional<Volume4<Scalar>> grad;
    bool requires_grad = false;
  };

  Var<Scalar> leaf(Volume4<Scalar> value, bool requires_grad = false, std::string name = "leaf");

  /// Appends a derived node. The rule is dropped when no parent needs a gradient.
  Var<Scalar> record(Volume4<Scalar> value, const std::vector<Var<Scalar>>& parents, std::string rule,
                     BackwardRule backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every rule in reverse order.
  /// Gradients of intermediate nodes are released unless `retain` is set.
  void backward(Var<Scalar> loss, bool retain = false);

  const Volume4<Scalar>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulated gradient, zero-filled when the node received none.
  Volume4<Scalar> grad(Var<Scalar> v) const;

  void accumulate(std::size_t id, Volume4<Scalar> g);

 private:
  std::deque<Node> nodes_;
};

// Differentiable operators. Parameters are ordinary leaf Vars.

template <typename Scalar>
Var<Scalar> conv3d(Var<Scalar> x, Var<Scalar> weights, Var<Scalar> bias, const ConvGeometry& g);

/// Adjoint convolution; `weights` uses the forward-conv layout and the result
/// has `out_channels` (the forward conv's input width) channels.
template <typename Scalar>
Var<Scalar> transposed_conv3d(Var<Scalar> x, Var<Scalar> weights, const ConvGeometry& g, Index out_channels);

template <typename Scalar>
Var<Scalar> pixel_shuffle(Var<Scalar> x, const ShuffleFactors& f);

template <typename Scalar>
Var<Scalar> pixel_unshuffle(Var<Scalar> x, const ShuffleFactors& f);

template <typename Scalar>
Var<Scalar> instance_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps = Scalar(1e-5));

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope = Scalar(0.01));

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x);

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts);

template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> x);

template <typename Scalar>
Var<Scalar> log_softmax(Var<Scalar> x);

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b);

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b);

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Scalar factor);

/// Scalar (1x1x1x1) sum of every element.
template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x);

/// sum_i weights[i] * terms[i] over scalar nodes.
template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<double>& weights);

/// Sub-pixel upsampling block on tape; parameters are passed as leaf Vars.
template <typename Scalar>
struct SubpixelVars {
  Var<Scalar> expand_w, expand_b, project_w, project_b;
};

template <typename Scalar>
Var<Scalar> subpixel_block(Var<Scalar> x, const SubpixelVars<Scalar>& p, const ShuffleFactors& f);

// ---------------------------------------------------------------------------

template <typename Scalar>
struct Parameter {
  std::string name;
  Volume4<Scalar> value;
};

/// Momentum buffers, one per parameter, lazily sized.
template <typename Scalar>
struct SgdState {
  std::vector<Volume4<Scalar>> velocity;
};

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.99;
  double weight_decay = 3e-5;
  bool nesterov = true;
};

/// g = grad + weight_decay param; v <- momentum v + g; the step is
/// param -= lr (g + momentum v) with Nesterov momentum, param -= lr v without.
/// Throws NumericError naming the first parameter with a non-finite gradient;
/// in that case nothing is updated.
template <typename Scalar>
void sgd_step(std::vector<Parameter<Scalar>>& params, const std::vector<Volume4<Scalar>>& grads,
              const SgdOptions& opt, SgdState<Scalar>& state);

}  // namespace neunet::ag
