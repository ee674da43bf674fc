#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "neunet/volume.hpp"

namespace neunet {

// .vol container: "NEUVOL01", u32 dtype (1 = f32, 2 = i32), u64 H, W, D, C,
// f64 spacing x3, then the raw buffer. Everything little-endian.

enum class VolDtype : std::uint32_t { f32 = 1, i32 = 2 };

void write_vol(std::ostream& os, const Volume4<float>& v);
void write_vol(std::ostream& os, const LabelVolume& v);

/// A decoded file is either an intensity volume or a label map (C must be 1).
using AnyVolume = std::variant<Volume4<float>, LabelVolume>;

AnyVolume read_vol(std::istream& is);

void save_vol(const std::filesystem::path& path, const Volume4<float>& v);
void save_vol(const std::filesystem::path& path, const LabelVolume& v);
Volume4<float> load_image(const std::filesystem::path& path);
/// num_classes <= 0 infers max(label) + 1.
LabelVolume load_labels(const std::filesystem::path& path, int num_classes = 0);

}  // namespace neunet
