#pragma once

#include <filesystem>
#include <vector>

#include "neunet/kv.hpp"
#include "neunet/network.hpp"

namespace neunet {

// .nvckpt layout: a text header ("NVCKPT1", key=value manifest, "end"),
// then one .vol blob per parameter followed by one per momentum buffer.

struct Checkpoint {
  NetConfig config;
  std::vector<ag::Parameter<float>> params;
  std::vector<Volume4<float>> velocity;  // empty when no optimiser state was saved
  int epoch = 0;                         // completed epochs
  double best_score = -1.0;
  KeyValues meta;  // free-form run settings

  static Checkpoint capture(const Network<float>& net, const ag::SgdState<float>* sgd, int epoch, double best_score,
                            KeyValues meta = {});

  /// Copies parameters into `net`; throws ConfigError on a name or shape mismatch.
  void apply(Network<float>& net) const;
  Network<float> network() const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace neunet
