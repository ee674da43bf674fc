#include "neunet/losses.hpp"

#include <cmath>
#include <numeric>

namespace neunet {

std::array<DeepSupWeights::Rational, DeepSupWeights::heads> DeepSupWeights::rational() {
  // Common denominator 2^5 turns every 2^-m into an integer.
  std::int64_t den = 0;
  for (int m = 0; m <= 5; ++m) den += std::int64_t{1} << (5 - m);
  std::array<Rational, heads> w{};
  for (int i = 1; i <= heads; ++i) {
    const std::int64_t num = std::int64_t{1} << (5 - (i - 1));
    const std::int64_t g = std::gcd(num, den);
    w[i - 1] = {num / g, den / g};
  }
  return w;
}

std::array<double, DeepSupWeights::heads> DeepSupWeights::values() {
  std::array<double, heads> out{};
  const auto r = rational();
  for (int i = 0; i < heads; ++i) out[i] = static_cast<double>(r[i].num) / static_cast<double>(r[i].den);
  return out;
}

template <typename Scalar>
Volume4<Scalar> one_hot(const LabelVolume& labels) {
  Volume4<Scalar> g(Shape4::from(labels.shape, labels.num_classes), labels.spacing);
  for (Index v = 0; v < labels.voxels(); ++v) {
    const auto c = labels.data[v];
    if (c < 0 || c >= labels.num_classes) throw ArgumentError("one_hot: label outside class range");
    g.data()[v * labels.num_classes + c] = Scalar(1);
  }
  return g;
}

namespace {

template <typename Scalar>
void check_pair(const Volume4<Scalar>& s, const Volume4<Scalar>& g, const char* op) {
  if (s.shape() != g.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + to_string(s.shape()) + " vs ground truth " +
                         to_string(g.shape()));
  }
}

struct DiceTerms {
  double overlap, total;
};

template <typename Scalar>
DiceTerms dice_terms(const Volume4<Scalar>& s, const Volume4<Scalar>& g) {
  double overlap = 0.0, total = 0.0;
  for (Index n = 0; n < s.size(); ++n) {
    overlap += static_cast<double>(g.data()[n]) * static_cast<double>(s.data()[n]);
    total += static_cast<double>(g.data()[n]) + static_cast<double>(s.data()[n]);
  }
  return {overlap, total};
}

}  // namespace

template <typename Scalar>
double dice_loss(const Volume4<Scalar>& probs, const Volume4<Scalar>& onehot, double smooth) {
  check_pair(probs, onehot, "dice_loss");
  const auto t = dice_terms(probs, onehot);
  return 1.0 - (2.0 * t.overlap + smooth) / (t.total + smooth);
}

template <typename Scalar>
double ce_loss(const Volume4<Scalar>& probs, const Volume4<Scalar>& onehot, double floor) {
  check_pair(probs, onehot, "ce_loss");
  double acc = 0.0;
  for (Index n = 0; n < probs.size(); ++n) {
    const double g = static_cast<double>(onehot.data()[n]);
    if (g != 0.0) acc += g * std::log(std::max(static_cast<double>(probs.data()[n]), floor));
  }
  return -acc / static_cast<double>(probs.voxels());
}

template <typename Scalar>
double total_loss(const std::vector<Volume4<Scalar>>& head_probs, const LabelVolume& label) {
  if (head_probs.size() != DeepSupWeights::heads) {
    throw ConfigError("total_loss: expected " + std::to_string(DeepSupWeights::heads) + " heads, got " +
                      std::to_string(head_probs.size()));
  }
  const auto w = DeepSupWeights::values();
  double total = 0.0;
  for (std::size_t i = 0; i < head_probs.size(); ++i) {
    const auto g = one_hot<Scalar>(resize_nearest(label, head_probs[i].spatial()));
    total += w[i] * (dice_loss(head_probs[i], g) + ce_loss(head_probs[i], g));
  }
  return total;
}

namespace ag {

namespace {

template <typename Scalar>
Volume4<Scalar> scalar_volume(double v) {
  return Volume4<Scalar>::constant(Shape4{1, 1, 1, 1}, static_cast<Scalar>(v));
}

}  // namespace

template <typename Scalar>
Var<Scalar> dice_loss(Var<Scalar> probs, const Volume4<Scalar>& onehot, double smooth) {
  check_pair(probs.value(), onehot, "dice_loss");
  const auto t = dice_terms(probs.value(), onehot);
  const double value = 1.0 - (2.0 * t.overlap + smooth) / (t.total + smooth);
  const std::size_t si = probs.id;
  return probs.tape->record(scalar_volume<Scalar>(value), {probs}, "dice_loss",
                            [si, onehot, t, smooth](Tape<Scalar>& tape, const Volume4<Scalar>& gy) {
                              const auto& s = tape.value(si);
                              const double num = 2.0 * t.overlap + smooth;
                              const double den = t.total + smooth;
                              const double up = static_cast<double>(gy.data()[0]);
                              Volume4<Scalar> ds(s.shape(), s.spacing());
                              for (Index n = 0; n < s.size(); ++n) {
                                const double g = static_cast<double>(onehot.data()[n]);
                                ds.data()[n] = static_cast<Scalar>(-up * (2.0 * g * den - num) / (den * den));
                              }
                              tape.accumulate(si, std::move(ds));
                            });
}

template <typename Scalar>
Var<Scalar> ce_loss(Var<Scalar> probs, const Volume4<Scalar>& onehot, double floor) {
  const double value = neunet::ce_loss(probs.value(), onehot, floor);
  const std::size_t si = probs.id;
  return probs.tape->record(scalar_volume<Scalar>(value), {probs}, "ce_loss",
                            [si, onehot, floor](Tape<Scalar>& tape, const Volume4<Scalar>& gy) {
                              const auto& s = tape.value(si);
                              const double up = static_cast<double>(gy.data()[0]);
                              const double n = static_cast<double>(s.voxels());
                              Volume4<Scalar> ds(s.shape(), s.spacing());
                              for (Index k = 0; k < s.size(); ++k) {
                                const double g = static_cast<double>(onehot.data()[k]);
                                const double p = static_cast<double>(s.data()[k]);
                                if (g != 0.0 && p > floor) ds.data()[k] = static_cast<Scalar>(-up * g / (n * p));
                              }
                              tape.accumulate(si, std::move(ds));
                            });
}

template <typename Scalar>
Var<Scalar> ce_from_log_probs(Var<Scalar> log_probs, const Volume4<Scalar>& onehot) {
  check_pair(log_probs.value(), onehot, "ce_loss");
  const auto& lp = log_probs.value();
  const double n = static_cast<double>(lp.voxels());
  double acc = 0.0;
  for (Index k = 0; k < lp.size(); ++k) {
    const double g = static_cast<double>(onehot.data()[k]);
    if (g != 0.0) acc += g * static_cast<double>(lp.data()[k]);
  }
  const std::size_t li = log_probs.id;
  return log_probs.tape->record(scalar_volume<Scalar>(-acc / n), {log_probs}, "ce_from_log_probs",
                                [li, onehot, n](Tape<Scalar>& tape, const Volume4<Scalar>& gy) {
                                  Volume4<Scalar> d = onehot;
                                  d.data() *= static_cast<Scalar>(-static_cast<double>(gy.data()[0]) / n);
                                  tape.accumulate(li, std::move(d));
                                });
}

template <typename Scalar>
Var<Scalar> total_loss(const std::vector<Var<Scalar>>& head_logits, const LabelVolume& label) {
  if (head_logits.size() != DeepSupWeights::heads) {
    throw ConfigError("total_loss: expected " + std::to_string(DeepSupWeights::heads) + " heads, got " +
                      std::to_string(head_logits.size()));
  }
  const auto w = DeepSupWeights::values();
  std::vector<Var<Scalar>> terms;
  for (const auto& logits : head_logits) {
    const auto g = one_hot<Scalar>(resize_nearest(label, logits.value().spatial()));
    auto d = dice_loss(softmax(logits), g);
    auto ce = ce_from_log_probs(log_softmax(logits), g);
    terms.push_back(add(d, ce));
  }
  return weighted_sum(terms, std::vector<double>(w.begin(), w.end()));
}

}  // namespace ag

#define NEUNET_INSTANTIATE(S)                                                                   \
  template Volume4<S> one_hot(const LabelVolume&);                                              \
  template double dice_loss(const Volume4<S>&, const Volume4<S>&, double);                      \
  template double ce_loss(const Volume4<S>&, const Volume4<S>&, double);                        \
  template double total_loss(const std::vector<Volume4<S>>&, const LabelVolume&);               \
  template ag::Var<S> ag::dice_loss(ag::Var<S>, const Volume4<S>&, double);                     \
  template ag::Var<S> ag::ce_loss(ag::Var<S>, const Volume4<S>&, double);                       \
  template ag::Var<S> ag::ce_from_log_probs(ag::Var<S>, const Volume4<S>&);                     \
  template ag::Var<S> ag::total_loss(const std::vector<ag::Var<S>>&, const LabelVolume&);

NEUNET_INSTANTIATE(float)
NEUNET_INSTANTIATE(double)

}  // namespace neunet
