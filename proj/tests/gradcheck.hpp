#pragma once

// Finite-difference checks for every differentiable operator, shared by the
// unit tests and the acceptance run.

#include <functional>
#include <string>
#include <vector>

#include "neunet/autograd.hpp"
#include "neunet/losses.hpp"
#include "oracles.hpp"

namespace gradcheck {

using neunet::Index;
using neunet::Index3;
using neunet::LabelVolume;
using neunet::Shape4;
using neunet::Volume4;
namespace ag = neunet::ag;

using Builder = std::function<ag::Var<double>(ag::Tape<double>&, const std::vector<ag::Var<double>>&)>;

struct OpCase {
  std::string name;
  std::vector<Volume4<double>> inputs;
  Builder build;
  double h = 1e-5;
};

struct Outcome {
  std::string name;
  oracle::GradCheck check;
};

/// Reduces a non-scalar output to sum(out * R) with a fixed random R so
/// that every output element gets a distinct upstream gradient.
inline ag::Var<double> reduce(ag::Tape<double>& tape, ag::Var<double> out, std::uint64_t seed = 99) {
  if (out.value().size() == 1) return out;
  std::mt19937_64 rng(seed);
  auto r = tape.leaf(oracle::random_volume<double>(out.shape(), rng), false, "probe");
  return ag::sum(ag::mul(out, r));
}

inline Outcome run(OpCase c, double rel_tol = 1e-3, double abs_floor = 1e-6) {
  std::vector<Volume4<double>> analytic;
  {
    ag::Tape<double> tape;
    std::vector<ag::Var<double>> vars;
    for (const auto& v : c.inputs) vars.push_back(tape.leaf(v, true));
    auto loss = reduce(tape, c.build(tape, vars));
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  std::vector<Volume4<double>*> ptrs;
  for (auto& v : c.inputs) ptrs.push_back(&v);
  auto loss_fn = [&]() {
    ag::Tape<double> tape;
    std::vector<ag::Var<double>> vars;
    for (const auto& v : c.inputs) vars.push_back(tape.leaf(v, false));
    return reduce(tape, c.build(tape, vars)).value().data()[0];
  };
  return {c.name, oracle::finite_difference(ptrs, analytic, loss_fn, c.h, rel_tol, abs_floor)};
}

inline LabelVolume random_labels(const Index3& shape, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, classes - 1);
  LabelVolume l(shape, classes);
  for (Index i = 0; i < l.voxels(); ++i) l.data[i] = u(rng);
  return l;
}

/// One case per operator plus the sub-pixel -> dice composite and the deep-supervised loss.
inline std::vector<OpCase> all_cases(std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  auto rv = [&](const Shape4& s, double lo = -1.0, double hi = 1.0) {
    return oracle::random_volume<double>(s, rng, lo, hi);
  };
  std::vector<OpCase> cases;

  const neunet::ConvGeometry g3 = neunet::ConvGeometry::same({3, 3, 3});
  const neunet::ConvGeometry g_down{{3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
  const neunet::ConvGeometry g_aniso{{1, 3, 3}, {1, 2, 2}, {0, 1, 1}};
  for (const auto& [name, g] : std::vector<std::pair<std::string, neunet::ConvGeometry>>{
           {"conv3d same", g3}, {"conv3d stride 2", g_down}, {"conv3d 1x3x3 stride (1,2,2)", g_aniso}}) {
    cases.push_back({name,
                     {rv({4, 4, 4, 2}), rv(neunet::kernel_shape(2, 3, g)), rv({1, 1, 1, 3})},
                     [g](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                       return ag::conv3d(v[0], v[1], v[2], g);
                     }});
  }
  // loss = sum(conv3d(x, k)^2) / 2
  cases.push_back({"half squared conv output",
                   {rv({5, 5, 5, 1}), rv(neunet::kernel_shape(1, 2, g3)), rv({1, 1, 1, 2})},
                   [g3](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     auto y = ag::conv3d(v[0], v[1], v[2], g3);
                     return ag::scale(ag::sum(ag::mul(y, y)), 0.5);
                   },
                   1e-4});
  cases.push_back({"transposed_conv3d",
                   {rv({2, 3, 2, 3}), rv(neunet::kernel_shape(2, 3, g_down))},
                   [g_down](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::transposed_conv3d(v[0], v[1], g_down, 2);
                   }});
  cases.push_back({"pixel_shuffle", {rv({2, 2, 1, 8})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::pixel_shuffle(v[0], neunet::ShuffleFactors{{2, 2, 2}});
                   }});
  cases.push_back({"pixel_unshuffle", {rv({2, 4, 4, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::pixel_unshuffle(v[0], neunet::ShuffleFactors{{1, 2, 2}});
                   }});
  cases.push_back({"instance_norm",
                   {rv({3, 3, 2, 2}, -2.0, 3.0), rv({1, 1, 1, 2}, 0.5, 1.5), rv({1, 1, 1, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::instance_norm(v[0], v[1], v[2]);
                   }});
  cases.push_back({"leaky_relu", {rv({3, 3, 3, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::leaky_relu(v[0], 0.01); }});
  cases.push_back({"tanh", {rv({3, 3, 3, 2}, -2.0, 2.0)},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::tanh(v[0]); }});
  cases.push_back({"concat_channels", {rv({2, 3, 2, 1}), rv({2, 3, 2, 3})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::concat_channels<double>({v[1], v[0], v[1]});
                   }});
  cases.push_back({"softmax", {rv({2, 2, 2, 4}, -3.0, 3.0)},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::softmax(v[0]); }});
  cases.push_back({"log_softmax", {rv({2, 2, 2, 4}, -3.0, 3.0)},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::log_softmax(v[0]); }});
  cases.push_back({"add", {rv({2, 2, 3, 2}), rv({2, 2, 3, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::add(v[0], v[1]); }});
  cases.push_back({"mul", {rv({2, 2, 3, 2}), rv({2, 2, 3, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::mul(v[0], v[1]); }});
  cases.push_back({"scale", {rv({2, 2, 3, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::scale(v[0], -2.5); }});
  cases.push_back({"sum", {rv({2, 2, 3, 2})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) { return ag::sum(v[0]); }});
  cases.push_back({"weighted_sum", {rv({1, 1, 1, 1}), rv({1, 1, 1, 1}), rv({1, 1, 1, 1})},
                   [](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::weighted_sum<double>({v[0], v[1], v[2]}, {0.5, -1.0, 2.0});
                   }});

  auto onehot = neunet::one_hot<double>(random_labels({3, 3, 2}, 3, rng));
  cases.push_back({"dice_loss", {rv({3, 3, 2, 3}, 0.05, 1.0)},
                   [onehot](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::dice_loss(v[0], onehot);
                   }});
  cases.push_back({"ce_loss", {rv({3, 3, 2, 3}, 0.05, 1.0)},
                   [onehot](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::ce_loss(v[0], onehot);
                   }});
  cases.push_back({"ce_from_log_probs", {rv({3, 3, 2, 3}, -3.0, -0.1)},
                   [onehot](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::ce_from_log_probs(v[0], onehot);
                   }});
  cases.push_back({"dice + ce on logits", {rv({3, 3, 2, 3}, -2.0, 2.0)},
                   [onehot](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                     return ag::add(ag::dice_loss(ag::softmax(v[0]), onehot),
                                    ag::ce_from_log_probs(ag::log_softmax(v[0]), onehot));
                   }});

  // Sub-pixel block on a 4x4x4 input feeding the dice loss.
  {
    const Index c = 2, out_c = 3;
    const neunet::ShuffleFactors f{{2, 2, 2}};
    neunet::SubpixelParams<double> p(c, out_c, f);
    p.expand.init_kaiming(rng);
    p.project.init_kaiming(rng);
    auto bias_e = rv({1, 1, 1, 2 * c}, -0.1, 0.1);
    auto bias_p = rv({1, 1, 1, f.product() * out_c}, -0.1, 0.1);
    auto target = neunet::one_hot<double>(random_labels({8, 8, 8}, int(out_c), rng));
    cases.push_back({"subpixel_block -> softmax -> dice_loss",
                     {rv({4, 4, 4, c}), p.expand.weights, bias_e, p.project.weights, bias_p},
                     [f, target](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                       ag::SubpixelVars<double> sv{v[1], v[2], v[3], v[4]};
                       return ag::dice_loss(ag::softmax(ag::subpixel_block(v[0], sv, f)), target);
                     }});
  }

  // Deep-supervised total loss over five heads.
  {
    auto label = random_labels({4, 4, 4}, 3, rng);
    cases.push_back({"total_loss",
                     {rv({4, 4, 4, 3}, -2, 2), rv({2, 2, 2, 3}, -2, 2), rv({1, 1, 1, 3}, -2, 2),
                      rv({1, 1, 1, 3}, -2, 2), rv({1, 1, 1, 3}, -2, 2)},
                     [label](ag::Tape<double>&, const std::vector<ag::Var<double>>& v) {
                       return ag::total_loss(v, label);
                     }});
  }
  return cases;
}

}  // namespace gradcheck
