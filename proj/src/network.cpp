#include "neunet/network.hpp"

#include <algorithm>
#include <cmath>

namespace neunet {

namespace {

constexpr Index3 kIso{2, 2, 2};
constexpr Index3 kAniso{1, 2, 2};
constexpr Index3 kKernelIso{3, 3, 3};
constexpr Index3 kKernelAniso{1, 3, 3};

Index3 kernel_for(const Index3& stride) { return stride == kAniso ? kKernelAniso : kKernelIso; }

std::string stage_name(const char* part, int t) { return std::string(part) + std::to_string(t); }

}  // namespace

NetConfig NetConfig::make(const std::vector<Index3>& strides, Index base_channels, Index channel_cap,
                          Index num_classes, Index in_channels) {
  NetConfig c;
  c.stride_schedule = strides;
  c.base_channels = base_channels;
  c.channel_cap = channel_cap;
  c.num_classes = num_classes;
  c.in_channels = in_channels;
  if (strides.size() != kLayers - 1) {
    throw ConfigError("stride schedule needs " + std::to_string(kLayers - 1) + " entries, got " +
                      std::to_string(strides.size()));
  }
  c.kernel_schedule.push_back(kernel_for(strides.front()));
  for (const auto& s : strides) c.kernel_schedule.push_back(kernel_for(s));
  for (int t = 1; t < kLayers; ++t) c.wavelet_branch_channels.push_back(std::max<Index>(8, c.stage_channels(t) / 4));
  c.validate();
  return c;
}

NetConfig NetConfig::desk() { return make(std::vector<Index3>(kLayers - 1, kIso), 8, 64, 3); }

Index NetConfig::stage_channels(int stage) const {
  Index c = base_channels;
  for (int t = 0; t < stage; ++t) c = std::min(c * 2, channel_cap);
  return std::min(c, channel_cap);
}

Index3 NetConfig::cumulative_stride(int stage) const {
  Index3 s{1, 1, 1};
  for (int t = 0; t < stage; ++t)
    for (int a = 0; a < 3; ++a) s[a] *= stride_schedule.at(t)[a];
  return s;
}

void NetConfig::validate() const {
  if (num_layers != kLayers) throw ConfigError("num_layers is fixed at 6, got " + std::to_string(num_layers));
  if (stride_schedule.size() != kLayers - 1) throw ConfigError("stride schedule must have 5 entries");
  if (kernel_schedule.size() != kLayers) throw ConfigError("kernel schedule must have 6 entries");
  if (wavelet_branch_channels.size() != kLayers - 1) throw ConfigError("wavelet branch widths must have 5 entries");
  for (std::size_t t = 0; t < stride_schedule.size(); ++t) {
    const auto& s = stride_schedule[t];
    if (s != kIso && s != kAniso) throw ConfigError("stride " + to_string(s) + " must be (2,2,2) or (1,2,2)");
    if (kernel_schedule[t + 1] != kernel_for(s)) {
      throw ConfigError("stage " + std::to_string(t + 1) + " kernel " + to_string(kernel_schedule[t + 1]) +
                        " does not match stride " + to_string(s));
    }
  }
  if (kernel_schedule[0] != kKernelIso && kernel_schedule[0] != kKernelAniso) {
    throw ConfigError("stage 0 kernel must be 3x3x3 or 1x3x3");
  }
  if (in_channels < 1 || base_channels < 1 || channel_cap < base_channels || num_classes < 2) {
    throw ConfigError("invalid channel configuration");
  }
  for (Index w : wavelet_branch_channels) {
    if (w < 1) throw ConfigError("wavelet branch width must be positive");
  }
}

void NetConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "num_layers", num_layers);
  kv.set(prefix + "in_channels", static_cast<long long>(in_channels));
  kv.set(prefix + "base_channels", static_cast<long long>(base_channels));
  kv.set(prefix + "channel_cap", static_cast<long long>(channel_cap));
  kv.set(prefix + "num_classes", static_cast<long long>(num_classes));
  kv.set(prefix + "wavelet_branch", wavelet_branch ? 1 : 0);
  for (std::size_t t = 0; t < stride_schedule.size(); ++t) {
    kv.set(prefix + "stride." + std::to_string(t + 1), stride_schedule[t]);
    kv.set(prefix + "wavelet_channels." + std::to_string(t + 1), static_cast<long long>(wavelet_branch_channels[t]));
  }
  for (std::size_t t = 0; t < kernel_schedule.size(); ++t) {
    kv.set(prefix + "kernel." + std::to_string(t), kernel_schedule[t]);
  }
}

NetConfig NetConfig::from_kv(const KeyValues& kv, const std::string& prefix) {
  NetConfig c;
  c.num_layers = static_cast<int>(kv.get_int(prefix + "num_layers"));
  c.in_channels = kv.get_int(prefix + "in_channels");
  c.base_channels = kv.get_int(prefix + "base_channels");
  c.channel_cap = kv.get_int(prefix + "channel_cap");
  c.num_classes = kv.get_int(prefix + "num_classes");
  c.wavelet_branch = kv.get_int(prefix + "wavelet_branch") != 0;
  for (int t = 1; t < kLayers; ++t) {
    c.stride_schedule.push_back(kv.get_index3(prefix + "stride." + std::to_string(t)));
    c.wavelet_branch_channels.push_back(kv.get_int(prefix + "wavelet_channels." + std::to_string(t)));
  }
  for (int t = 0; t < kLayers; ++t) c.kernel_schedule.push_back(kv.get_index3(prefix + "kernel." + std::to_string(t)));
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
std::size_t Network<Scalar>::add_param(const std::string& name, const Shape4& shape) {
  index_[name] = params_.size();
  params_.push_back({name, Volume4<Scalar>(shape)});
  return params_.size() - 1;
}

template <typename Scalar>
typename Network<Scalar>::Unit Network<Scalar>::add_unit(const std::string& prefix, Index in, Index out,
                                                         const ConvGeometry& g) {
  Unit u;
  u.geometry = g;
  u.w = add_param(prefix + ".w", kernel_shape(in, out, g));
  u.b = add_param(prefix + ".b", Shape4{1, 1, 1, out});
  u.gamma = add_param(prefix + ".gamma", Shape4{1, 1, 1, out});
  u.beta = add_param(prefix + ".beta", Shape4{1, 1, 1, out});
  return u;
}

template <typename Scalar>
Network<Scalar>::Network(NetConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  for (int t = 0; t < NetConfig::kLayers; ++t) {
    Stage st;
    const Index width = c.stage_channels(t);
    const auto& k = c.kernel_schedule[t];
    const std::string p = stage_name("enc", t);
    if (t == 0) {
      st.units.push_back(add_unit(p + ".unit0", c.in_channels, width, ConvGeometry::same(k)));
    } else {
      const auto& stride = c.stride_schedule[t - 1];
      st.units.push_back(add_unit(p + ".unit0", c.stage_channels(t - 1), width, ConvGeometry::same(k, stride)));
      const auto flags = flags_from_stride(stride);
      const Index bands = Index{1} << (int(flags[0]) + int(flags[1]) + int(flags[2]));
      st.wavelet = add_unit(stage_name("wav", t), c.in_channels * bands, c.wavelet_branch_channels[t - 1],
                            ConvGeometry::same(k));
    }
    const Index unit1_in = t == 0 ? width : width + c.wavelet_branch_channels[t - 1];
    st.units.push_back(add_unit(p + ".unit1", unit1_in, width, ConvGeometry::same(k)));
    encoder_.push_back(std::move(st));
  }

  decoder_.resize(NetConfig::kLayers - 1);
  for (int t = NetConfig::kLayers - 2; t >= 0; --t) {
    auto& d = decoder_[t];
    const std::string p = stage_name("dec", t);
    const Index below = c.stage_channels(t + 1);
    const Index width = c.stage_channels(t);
    d.factors.r = c.stride_schedule[t];
    const SubpixelParams<Scalar> shapes(below, width, d.factors);
    d.expand_w = add_param(p + ".up.expand.w", shapes.expand.weights.shape());
    d.expand_b = add_param(p + ".up.expand.b", shapes.expand.bias.shape());
    d.project_w = add_param(p + ".up.project.w", shapes.project.weights.shape());
    d.project_b = add_param(p + ".up.project.b", shapes.project.bias.shape());
    const auto g = ConvGeometry::same(c.kernel_schedule[t]);
    d.units.push_back(add_unit(p + ".unit0", 2 * width, width, g));
    d.units.push_back(add_unit(p + ".unit1", width, width, g));
    const ConvGeometry head{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}};
    d.head_w = add_param(stage_name("head", t) + ".w", kernel_shape(width, c.num_classes, head));
    d.head_b = add_param(stage_name("head", t) + ".b", Shape4{1, 1, 1, c.num_classes});
  }
}

template <typename Scalar>
std::size_t Network<Scalar>::parameter_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter " + name);
  return it->second;
}

template <typename Scalar>
Index Network<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename Scalar>
void Network<Scalar>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr double slope = 0.01;
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  std::map<std::size_t, const DecoderStage*> subpixel;
  for (const auto& d : decoder_) subpixel[d.project_w] = &d;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto& name = p.name;
    auto& v = p.value.data();
    if (auto it = subpixel.find(i); it != subpixel.end()) {
      const Index out = params_[it->second->project_b].value.size();
      fill_icnr(p.value, p.value.channels() / out, out, it->second->factors, rng, slope);
    } else if (name.ends_with(".gamma")) {
      v.setOnes();
    } else if (name.ends_with(".w")) {
      // Weight volumes are (k1, k2, k3, in * out); fan-in = taps * in.
      const auto& s = p.value.shape();
      const Index taps = s.h * s.w * s.d;
      const Index out = params_[parameter_index(name.substr(0, name.size() - 2) + ".b")].value.size();
      const double fan_in = static_cast<double>(taps * (s.c / out));
      std::normal_distribution<double> dist(0.0, gain / std::sqrt(fan_in));
      for (Index n = 0; n < v.size(); ++n) v[n] = static_cast<Scalar>(dist(rng));
    } else {
      v.setZero();
    }
  }
}

template <typename Scalar>
void Network<Scalar>::zero_parameters() {
  for (auto& p : params_) p.value.data().setZero();
}

template <typename Scalar>
std::vector<ag::Var<Scalar>> Network<Scalar>::bind(ag::Tape<Scalar>& tape, bool requires_grad) const {
  std::vector<ag::Var<Scalar>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.leaf(p.value, requires_grad, p.name));
  return out;
}

template <typename Scalar>
void Network<Scalar>::check_input(const Volume4<Scalar>& image) const {
  if (image.channels() != config_.in_channels) {
    throw DimensionError("network expects " + std::to_string(config_.in_channels) + " input channels, got " +
                         std::to_string(image.channels()));
  }
  const auto total = config_.cumulative_stride(NetConfig::kLayers - 1);
  for (int a = 0; a < 3; ++a) {
    if (image.spatial()[a] % total[a] != 0) {
      throw DimensionError("input extent " + to_string(image.spatial()) + " is not divisible by the cumulative stride " +
                           to_string(total) + "; pad the image first");
    }
  }
}

template <typename Scalar>
ag::Var<Scalar> Network<Scalar>::run_unit(const Unit& u, ag::Var<Scalar> x,
                                          const std::vector<ag::Var<Scalar>>& p) const {
  auto y = ag::conv3d(x, p[u.w], p[u.b], u.geometry);
  return ag::leaky_relu(ag::instance_norm(y, p[u.gamma], p[u.beta], Scalar(1e-5)), Scalar(0.01));
}

template <typename Scalar>
Volume4<Scalar> Network<Scalar>::band_input(const Volume4<Scalar>& stacked, int t) const {
  double gain = 1.0;
  for (int l = 0; l < t; ++l) {
    const auto& s = config_.stride_schedule[static_cast<std::size_t>(l)];
    for (int a = 0; a < 3; ++a)
      if (s[a] == 2) gain *= std::sqrt(0.5);
  }
  Volume4<Scalar> out = stacked;
  out.data() *= static_cast<Scalar>(gain);
  return out;
}

template <typename Scalar>
typename Network<Scalar>::Trace Network<Scalar>::forward(ag::Tape<Scalar>& tape,
                                                         const std::vector<ag::Var<Scalar>>& p,
                                                         const Volume4<Scalar>& image) const {
  check_input(image);
  if (p.size() != params_.size()) throw ArgumentError("forward: bound parameter count mismatch");
  const auto pyramid = build_pyramid(image, config_.stride_schedule);

  Trace tr;
  auto x = tape.leaf(image, false, "image");
  tr.encoder.push_back(run_unit(encoder_[0].units[1], run_unit(encoder_[0].units[0], x, p), p));
  for (int t = 1; t < NetConfig::kLayers; ++t) {
    const auto& st = encoder_[t];
    auto down = run_unit(st.units[0], tr.encoder.back(), p);
    ag::Var<Scalar> branch;
    if (config_.wavelet_branch) {
      branch = run_unit(*st.wavelet, tape.leaf(band_input(pyramid[t - 1].stacked, t), false, "wavelet_level"), p);
    } else {
      branch = tape.leaf(Volume4<Scalar>(Shape4::from(down.value().spatial(), config_.wavelet_branch_channels[t - 1]),
                                         down.value().spacing()),
                         false, "wavelet_off");
    }
    tr.encoder.push_back(run_unit(st.units[1], ag::concat_channels<Scalar>({down, branch}), p));
  }

  tr.heads.resize(decoder_.size());
  auto d = tr.encoder.back();
  for (int t = static_cast<int>(decoder_.size()) - 1; t >= 0; --t) {
    const auto& ds = decoder_[t];
    auto up = ag::subpixel_block(d, {p[ds.expand_w], p[ds.expand_b], p[ds.project_w], p[ds.project_b]}, ds.factors);
    auto merged = ag::concat_channels<Scalar>({up, tr.encoder[t]});
    d = run_unit(ds.units[1], run_unit(ds.units[0], merged, p), p);
    tr.heads[t] = ag::conv3d(d, p[ds.head_w], p[ds.head_b], ConvGeometry{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}});
  }
  return tr;
}

template <typename Scalar>
std::vector<Volume4<Scalar>> Network<Scalar>::forward(const Volume4<Scalar>& image) const {
  ag::Tape<Scalar> tape;
  const auto bound = bind(tape, false);
  const auto tr = forward(tape, bound, image);
  std::vector<Volume4<Scalar>> out;
  for (const auto& h : tr.heads) out.push_back(h.value());
  return out;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
LabelVolume argmax_channels(const Volume4<Scalar>& logits) {
  LabelVolume out(logits.spatial(), static_cast<int>(logits.channels()), logits.spacing());
  const auto m = logits.matrix();
  for (Index v = 0; v < logits.voxels(); ++v) {
    Index best;
    m.row(v).maxCoeff(&best);
    out.data[v] = static_cast<std::int32_t>(best);
  }
  return out;
}

namespace {

std::vector<Index> window_starts(Index extent, Index patch, double overlap) {
  if (extent <= patch) return {0};
  const auto step = std::max<Index>(1, static_cast<Index>(std::floor(static_cast<double>(patch) * (1.0 - overlap))));
  std::vector<Index> starts;
  for (Index s = 0; s + patch < extent; s += step) starts.push_back(s);
  starts.push_back(extent - patch);
  return starts;
}

}  // namespace

template <typename Scalar>
Volume4<Scalar> sliding_window_logits(const Network<Scalar>& net, const Volume4<Scalar>& image, const Index3& patch,
                                      double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ArgumentError("overlap must lie in [0, 1)");
  const auto total = net.config().cumulative_stride(NetConfig::kLayers - 1);
  for (int a = 0; a < 3; ++a) {
    if (patch[a] < 1 || patch[a] % total[a] != 0) {
      throw ArgumentError("patch " + to_string(patch) + " must be a positive multiple of the cumulative stride " +
                          to_string(total));
    }
  }
  const auto in = image.spatial();
  Index3 after{0, 0, 0};
  for (int a = 0; a < 3; ++a) after[a] = std::max<Index>(0, patch[a] - in[a]);
  const auto padded = pad(image, {0, 0, 0}, after, PadMode::zero);
  const auto ext = padded.spatial();

  const Index classes = net.config().num_classes;
  Volume4<Scalar> acc(Shape4::from(ext, classes), image.spacing());
  Eigen::Array<Scalar, Eigen::Dynamic, 1> counts = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(padded.voxels());
  for (Index si : window_starts(ext[0], patch[0], overlap))
    for (Index sj : window_starts(ext[1], patch[1], overlap))
      for (Index sk : window_starts(ext[2], patch[2], overlap)) {
        const BoundingBox box{{si, sj, sk}, patch};
        const auto logits = net.forward(crop(padded, box)).front();
        for (Index i = 0; i < patch[0]; ++i)
          for (Index j = 0; j < patch[1]; ++j)
            for (Index k = 0; k < patch[2]; ++k) {
              const Index v = (((si + i) * ext[1]) + sj + j) * ext[2] + sk + k;
              counts[v] += Scalar(1);
              for (Index c = 0; c < classes; ++c) acc.data()[v * classes + c] += logits(i, j, k, c);
            }
      }
  acc.matrix().array().colwise() /= counts;
  return crop(acc, BoundingBox{{0, 0, 0}, in});
}

template <typename Scalar>
LabelVolume infer(const Network<Scalar>& net, const Volume4<Scalar>& image, const Index3& patch, double overlap) {
  return argmax_channels(sliding_window_logits(net, image, patch, overlap));
}

template class Network<float>;
template class Network<double>;
template LabelVolume argmax_channels(const Volume4<float>&);
template LabelVolume argmax_channels(const Volume4<double>&);
template Volume4<float> sliding_window_logits(const Network<float>&, const Volume4<float>&, const Index3&, double);
template Volume4<double> sliding_window_logits(const Network<double>&, const Volume4<double>&, const Index3&, double);
template LabelVolume infer(const Network<float>&, const Volume4<float>&, const Index3&, double);
template LabelVolume infer(const Network<double>&, const Volume4<double>&, const Index3&, double);

}  // namespace neunet
