#include "neunet/autograd.hpp"

#include <cmath>

namespace neunet::ag {

template <typename Scalar>
Var<Scalar> Tape<Scalar>::leaf(Volume4<Scalar> value, bool requires_grad, std::string name) {
  Node n;
  n.value = std::move(value);
  n.rule = std::move(name);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::record(Volume4<Scalar> value, const std::vector<Var<Scalar>>& parents, std::string rule,
                                 BackwardRule backward) {
  Node n;
  n.value = std::move(value);
  n.rule = std::move(rule);
  for (const auto& p : parents) {
    if (p.tape != this) throw ArgumentError("autograd: parent belongs to a different tape");
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
void Tape<Scalar>::accumulate(std::size_t id, Volume4<Scalar> g) {
  auto& n = nodes_.at(id);
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw DimensionError("autograd: gradient shape " + to_string(g.shape()) + " for node '" + n.rule + "' of shape " +
                         to_string(n.value.shape()));
  }
  if (!n.grad) {
    n.grad = std::move(g);
  } else {
    n.grad->data() += g.data();
  }
}

template <typename Scalar>
void Tape<Scalar>::backward(Var<Scalar> loss, bool retain) {
  if (loss.tape != this) throw ArgumentError("backward: loss node belongs to a different tape");
  const auto& ln = nodes_.at(loss.id);
  if (ln.value.shape() != Shape4{1, 1, 1, 1}) {
    throw ArgumentError("backward: loss must be a 1x1x1x1 scalar, got " + to_string(ln.value.shape()));
  }
  accumulate(loss.id, Volume4<Scalar>::constant(Shape4{1, 1, 1, 1}, Scalar(1), ln.value.spacing()));
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.grad || !n.backward) continue;
    n.backward(*this, *n.grad);
    if (!retain && !n.parents.empty()) n.grad.reset();
  }
}

template <typename Scalar>
Volume4<Scalar> Tape<Scalar>::grad(Var<Scalar> v) const {
  const auto& n = nodes_.at(v.id);
  if (n.grad) return *n.grad;
  return Volume4<Scalar>(n.value.shape(), n.value.spacing());
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> conv3d(Var<Scalar> x, Var<Scalar> weights, Var<Scalar> bias, const ConvGeometry& g) {
  auto& tape = *x.tape;
  const Index out_c = weights.value().size() / (g.taps() * x.value().channels());
  if (out_c * g.taps() * x.value().channels() != weights.value().size()) {
    throw DimensionError("conv3d: weight volume does not match input channels");
  }
  const Volume4<Scalar>* b = bias.valid() ? &bias.value() : nullptr;
  auto y = conv3d_raw(x.value(), weights.value(), b, g, out_c);
  std::vector<Var<Scalar>> parents{x, weights};
  if (bias.valid()) parents.push_back(bias);
  const std::size_t xi = x.id, wi = weights.id;
  const std::optional<std::size_t> bi = bias.valid() ? std::optional<std::size_t>(bias.id) : std::nullopt;
  return tape.record(std::move(y), parents, "conv3d", [xi, wi, bi, g](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    const auto& xv = t.value(xi);
    const auto& wv = t.value(wi);
    if (t.requires_grad(xi)) {
      t.accumulate(xi, conv3d_adjoint(gy, wv, g, xv.channels(), xv.spatial(), xv.spacing()));
    }
    if (t.requires_grad(wi)) t.accumulate(wi, conv3d_weight_grad(xv, gy, g, wv.shape()));
    if (bi && t.requires_grad(*bi)) {
      Volume4<Scalar> gb(t.value(*bi).shape());
      gb.matrix() = gy.matrix().colwise().sum();
      t.accumulate(*bi, std::move(gb));
    }
  });
}

template <typename Scalar>
Var<Scalar> transposed_conv3d(Var<Scalar> x, Var<Scalar> weights, const ConvGeometry& g, Index out_channels) {
  const auto& xv = x.value();
  const Index3 out = g.transposed_output(xv.spatial());
  Spacing3 spacing;
  for (int a = 0; a < 3; ++a) spacing[a] = xv.spacing()[a] / static_cast<double>(g.stride[a]);
  auto y = conv3d_adjoint(xv, weights.value(), g, out_channels, out, spacing);
  const std::size_t xi = x.id, wi = weights.id;
  return x.tape->record(std::move(y), {x, weights}, "transposed_conv3d",
                        [xi, wi, g](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                          const auto& xv = t.value(xi);
                          const auto& wv = t.value(wi);
                          if (t.requires_grad(xi)) t.accumulate(xi, conv3d_raw<Scalar>(gy, wv, nullptr, g, xv.channels()));
                          if (t.requires_grad(wi)) t.accumulate(wi, conv3d_weight_grad(gy, xv, g, wv.shape()));
                        });
}

template <typename Scalar>
Var<Scalar> pixel_shuffle(Var<Scalar> x, const ShuffleFactors& f) {
  const std::size_t xi = x.id;
  return x.tape->record(neunet::pixel_shuffle(x.value(), f), {x}, "pixel_shuffle",
                        [xi, f](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                          t.accumulate(xi, neunet::pixel_unshuffle(gy, f));
                        });
}

template <typename Scalar>
Var<Scalar> pixel_unshuffle(Var<Scalar> x, const ShuffleFactors& f) {
  const std::size_t xi = x.id;
  return x.tape->record(neunet::pixel_unshuffle(x.value(), f), {x}, "pixel_unshuffle",
                        [xi, f](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                          t.accumulate(xi, neunet::pixel_shuffle(gy, f));
                        });
}

template <typename Scalar>
Var<Scalar> instance_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps) {
  InstanceNormStats<Scalar> stats;
  auto y = neunet::instance_norm(x.value(), gamma.value(), beta.value(), eps, &stats);
  const std::size_t xi = x.id, gi = gamma.id, bi = beta.id;
  return x.tape->record(
      std::move(y), {x, gamma, beta}, "instance_norm",
      [xi, gi, bi, stats = std::move(stats)](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
        const auto& xv = t.value(xi);
        const auto& gamma_v = t.value(gi).data();
        const Index n = xv.voxels();
        const Index c = xv.channels();
        const auto xm = xv.matrix();
        const auto gm = gy.matrix();
        RowMatrix<Scalar> xhat = ((xm.rowwise() - stats.mean.matrix().transpose()).array().rowwise() *
                                  stats.inv_std.transpose())
                                     .matrix();
        if (t.requires_grad(gi)) {
          Volume4<Scalar> dg(t.value(gi).shape());
          dg.matrix() = (gm.array() * xhat.array()).colwise().sum().matrix();
          t.accumulate(gi, std::move(dg));
        }
        if (t.requires_grad(bi)) {
          Volume4<Scalar> db(t.value(bi).shape());
          db.matrix() = gm.colwise().sum();
          t.accumulate(bi, std::move(db));
        }
        if (t.requires_grad(xi)) {
          Volume4<Scalar> dx(xv.shape(), xv.spacing());
          auto dm = dx.matrix();
          for (Index ch = 0; ch < c; ++ch) {
            const auto gg = (gm.col(ch).array() * gamma_v[ch]).eval();
            const Scalar mean_g = gg.sum() / static_cast<Scalar>(n);
            const Scalar mean_gx = (gg * xhat.col(ch).array()).sum() / static_cast<Scalar>(n);
            dm.col(ch) = (stats.inv_std[ch] * (gg - mean_g - xhat.col(ch).array() * mean_gx)).matrix();
          }
          t.accumulate(xi, std::move(dx));
        }
      });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope) {
  const std::size_t xi = x.id;
  return x.tape->record(neunet::leaky_relu(x.value(), slope), {x}, "leaky_relu",
                        [xi, slope](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                          const auto& xv = t.value(xi);
                          Volume4<Scalar> dx(xv.shape(), xv.spacing());
                          dx.data() = (xv.data() > Scalar(0)).select(gy.data(), gy.data() * slope);
                          t.accumulate(xi, std::move(dx));
                        });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x) {
  const std::size_t xi = x.id;
  auto y = tanh_act(x.value());
  auto& tape = *x.tape;
  const std::size_t yi = tape.size();
  return tape.record(std::move(y), {x}, "tanh", [xi, yi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    const auto& yv = t.value(yi);
    Volume4<Scalar> dx(yv.shape(), yv.spacing());
    dx.data() = gy.data() * (Scalar(1) - yv.data().square());
    t.accumulate(xi, std::move(dx));
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no parts");
  std::vector<Volume4<Scalar>> values;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    values.push_back(p.value());
    ids.push_back(p.id);
    widths.push_back(p.value().channels());
  }
  return parts.front().tape->record(neunet::concat_channels(values), parts, "concat_channels",
                                    [ids, widths](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                                      Index first = 0;
                                      for (std::size_t p = 0; p < ids.size(); ++p) {
                                        if (t.requires_grad(ids[p])) {
                                          t.accumulate(ids[p], slice_channels(gy, first, widths[p]));
                                        }
                                        first += widths[p];
                                      }
                                    });
}

template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> x) {
  const std::size_t xi = x.id;
  auto& tape = *x.tape;
  const std::size_t yi = tape.size();
  return tape.record(softmax_channels(x.value()), {x}, "softmax", [xi, yi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    const auto& s = t.value(yi);
    Volume4<Scalar> dx(s.shape(), s.spacing());
    const auto sm = s.matrix();
    const auto gm = gy.matrix();
    const auto dot = (sm.array() * gm.array()).rowwise().sum().eval();
    dx.matrix() = (sm.array() * (gm.array().colwise() - dot)).matrix();
    t.accumulate(xi, std::move(dx));
  });
}

template <typename Scalar>
Var<Scalar> log_softmax(Var<Scalar> x) {
  const std::size_t xi = x.id;
  auto& tape = *x.tape;
  const std::size_t yi = tape.size();
  return tape.record(log_softmax_channels(x.value()), {x}, "log_softmax",
                     [xi, yi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                       const auto& ly = t.value(yi);
                       Volume4<Scalar> dx(ly.shape(), ly.spacing());
                       const auto gm = gy.matrix();
                       const auto total = gm.rowwise().sum().eval();
                       dx.matrix() = (gm.array() - ly.matrix().array().exp().colwise() * total.array()).matrix();
                       t.accumulate(xi, std::move(dx));
                     });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
  Volume4<Scalar> y(a.shape(), a.value().spacing());
  y.data() = a.value().data() + b.value().data();
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, "add", [ai, bi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    t.accumulate(ai, gy);
    t.accumulate(bi, gy);
  });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
  Volume4<Scalar> y(a.shape(), a.value().spacing());
  y.data() = a.value().data() * b.value().data();
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, "mul", [ai, bi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    Volume4<Scalar> da = gy, db = gy;
    da.data() *= t.value(bi).data();
    db.data() *= t.value(ai).data();
    t.accumulate(ai, std::move(da));
    t.accumulate(bi, std::move(db));
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Scalar factor) {
  Volume4<Scalar> y = x.value();
  y.data() *= factor;
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {x}, "scale", [xi, factor](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    Volume4<Scalar> dx = gy;
    dx.data() *= factor;
    t.accumulate(xi, std::move(dx));
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  auto y = Volume4<Scalar>::constant(Shape4{1, 1, 1, 1}, x.value().data().sum());
  const std::size_t xi = x.id;
  return x.tape->record(std::move(y), {x}, "sum", [xi](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
    const auto& xv = t.value(xi);
    t.accumulate(xi, Volume4<Scalar>::constant(xv.shape(), gy.data()[0], xv.spacing()));
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<double>& weights) {
  if (terms.empty() || terms.size() != weights.size()) throw ArgumentError("weighted_sum: term/weight count mismatch");
  double total = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw DimensionError("weighted_sum: terms must be scalars");
    total += weights[i] * static_cast<double>(terms[i].value().data()[0]);
    ids.push_back(terms[i].id);
  }
  auto y = Volume4<Scalar>::constant(Shape4{1, 1, 1, 1}, static_cast<Scalar>(total));
  return terms.front().tape->record(std::move(y), terms, "weighted_sum",
                                    [ids, weights](Tape<Scalar>& t, const Volume4<Scalar>& gy) {
                                      for (std::size_t i = 0; i < ids.size(); ++i) {
                                        t.accumulate(ids[i], Volume4<Scalar>::constant(
                                                                 Shape4{1, 1, 1, 1},
                                                                 static_cast<Scalar>(weights[i]) * gy.data()[0]));
                                      }
                                    });
}

template <typename Scalar>
Var<Scalar> subpixel_block(Var<Scalar> x, const SubpixelVars<Scalar>& p, const ShuffleFactors& f) {
  const auto expand = ConvGeometry::same({5, 5, 5});
  const auto project = ConvGeometry::same({3, 3, 3});
  auto h = tanh(conv3d(x, p.expand_w, p.expand_b, expand));
  return pixel_shuffle(leaky_relu(conv3d(h, p.project_w, p.project_b, project)), f);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
void sgd_step(std::vector<Parameter<Scalar>>& params, const std::vector<Volume4<Scalar>>& grads,
              const SgdOptions& opt, SgdState<Scalar>& state) {
  if (!(opt.lr > 0.0)) throw ArgumentError("sgd_step: learning rate must be positive");
  if (grads.size() != params.size()) throw ArgumentError("sgd_step: gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw DimensionError("sgd_step: gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) throw NumericError("non-finite gradient for parameter " + params[i].name);
  }
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const auto& p : params) state.velocity.emplace_back(p.value.shape(), p.value.spacing());
  }
  const auto lr = static_cast<Scalar>(opt.lr);
  const auto mu = static_cast<Scalar>(opt.momentum);
  const auto wd = static_cast<Scalar>(opt.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.velocity[i].data();
    auto& w = params[i].value.data();
    const auto g = (grads[i].data() + wd * w).eval();
    v = mu * v + g;
    if (opt.nesterov) w -= lr * (g + mu * v);
    else w -= lr * v;
  }
}

#define NEUNET_INSTANTIATE(S)                                                                              \
  template class Tape<S>;                                                                                  \
  template Var<S> conv3d(Var<S>, Var<S>, Var<S>, const ConvGeometry&);                                     \
  template Var<S> transposed_conv3d(Var<S>, Var<S>, const ConvGeometry&, Index);                           \
  template Var<S> pixel_shuffle(Var<S>, const ShuffleFactors&);                                            \
  template Var<S> pixel_unshuffle(Var<S>, const ShuffleFactors&);                                          \
  template Var<S> instance_norm(Var<S>, Var<S>, Var<S>, S);                                                \
  template Var<S> leaky_relu(Var<S>, S);                                                                   \
  template Var<S> tanh(Var<S>);                                                                            \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                                             \
  template Var<S> softmax(Var<S>);                                                                         \
  template Var<S> log_softmax(Var<S>);                                                                     \
  template Var<S> add(Var<S>, Var<S>);                                                                     \
  template Var<S> mul(Var<S>, Var<S>);                                                                     \
  template Var<S> scale(Var<S>, S);                                                                        \
  template Var<S> sum(Var<S>);                                                                             \
  template Var<S> weighted_sum(const std::vector<Var<S>>&, const std::vector<double>&);                    \
  template Var<S> subpixel_block(Var<S>, const SubpixelVars<S>&, const ShuffleFactors&);                   \
  template void sgd_step(std::vector<Parameter<S>>&, const std::vector<Volume4<S>>&, const SgdOptions&,    \
                         SgdState<S>&);

NEUNET_INSTANTIATE(float)
NEUNET_INSTANTIATE(double)

}  // namespace neunet::ag
