#include "neunet/checkpoint.hpp"

#include <fstream>

#include "neunet/vol_io.hpp"

namespace neunet {

namespace {

constexpr const char* kMagic = "NVCKPT1";
constexpr const char* kEnd = "end";

std::string shape_text(const Shape4& s) {
  return std::to_string(s.h) + "," + std::to_string(s.w) + "," + std::to_string(s.d) + "," + std::to_string(s.c);
}

}  // namespace

Checkpoint Checkpoint::capture(const Network<float>& net, const ag::SgdState<float>* sgd, int epoch,
                               double best_score, KeyValues meta) {
  Checkpoint c;
  c.config = net.config();
  c.params = net.parameters();
  if (sgd != nullptr) c.velocity = sgd->velocity;
  c.epoch = epoch;
  c.best_score = best_score;
  c.meta = std::move(meta);
  return c;
}

void Checkpoint::apply(Network<float>& net) const {
  auto& dst = net.parameters();
  if (dst.size() != params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(params.size()) + " parameters, network expects " +
                      std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].value.shape() != params[i].value.shape()) {
      throw ConfigError("checkpoint parameter " + params[i].name + " " + to_string(params[i].value.shape()) +
                        " does not match " + dst[i].name + " " + to_string(dst[i].value.shape()));
    }
    dst[i].value = params[i].value;
  }
}

Network<float> Checkpoint::network() const {
  Network<float> net(config);
  apply(net);
  return net;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (!velocity.empty() && velocity.size() != params.size()) {
    throw ArgumentError("checkpoint: momentum buffer count does not match parameter count");
  }
  KeyValues kv = meta;
  config.to_kv(kv);
  kv.set("epoch", epoch);
  kv.set("best_score", best_score);
  kv.set("param.count", static_cast<long long>(params.size()));
  kv.set("velocity.count", static_cast<long long>(velocity.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    kv.set("param." + std::to_string(i) + ".name", params[i].name);
    kv.set("param." + std::to_string(i) + ".shape", shape_text(params[i].value.shape()));
  }

  // Write to a sibling file and rename so an interrupted save never leaves a torn checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << kMagic << "\n";
    kv.write(os);
    os << kEnd << "\n";
    for (const auto& p : params) write_vol(os, p.value);
    for (const auto& v : velocity) write_vol(os, v);
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(is, magic);
  if (magic != kMagic) throw IoError(path.string() + " is not a checkpoint");
  KeyValues kv = KeyValues::read(is, kEnd);

  Checkpoint c;
  c.config = NetConfig::from_kv(kv);
  c.epoch = static_cast<int>(kv.get_int("epoch"));
  c.best_score = kv.get_double("best_score");
  const auto n = kv.get_int("param.count");
  const auto nv = kv.get_int("velocity.count");
  for (long long i = 0; i < n; ++i) {
    auto any = read_vol(is);
    auto* v = std::get_if<Volume4<float>>(&any);
    if (v == nullptr) throw IoError(path.string() + ": parameter blob " + std::to_string(i) + " is not float");
    const auto name = kv.get("param." + std::to_string(i) + ".name");
    if (shape_text(v->shape()) != kv.get("param." + std::to_string(i) + ".shape")) {
      throw IoError(path.string() + ": shape mismatch for " + name);
    }
    c.params.push_back({name, std::move(*v)});
  }
  for (long long i = 0; i < nv; ++i) {
    auto any = read_vol(is);
    auto* v = std::get_if<Volume4<float>>(&any);
    if (v == nullptr) throw IoError(path.string() + ": momentum blob " + std::to_string(i) + " is not float");
    c.velocity.push_back(std::move(*v));
  }
  for (const auto& [k, v] : kv.entries()) {
    if (!k.starts_with("net.") && !k.starts_with("param.") && !k.starts_with("velocity.") && k != "epoch" &&
        k != "best_score") {
      c.meta.set(k, v);
    }
  }
  return c;
}

}  // namespace neunet
