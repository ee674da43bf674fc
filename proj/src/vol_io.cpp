#include "neunet/vol_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace neunet {

namespace {

constexpr char kMagic[8] = {'N', 'E', 'U', 'V', 'O', 'L', '0', '1'};

static_assert(std::endian::native == std::endian::little, ".vol I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("truncated .vol header");
  return value;
}

void put_header(std::ostream& os, VolDtype dtype, const Shape4& s, const Spacing3& spacing) {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dtype));
  for (int a = 0; a < 4; ++a) put<std::uint64_t>(os, static_cast<std::uint64_t>(s[a]));
  for (double sp : spacing) put<double>(os, sp);
}

}  // namespace

void write_vol(std::ostream& os, const Volume4<float>& v) {
  put_header(os, VolDtype::f32, v.shape(), v.spacing());
  os.write(reinterpret_cast<const char*>(v.data().data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!os) throw IoError("failed writing .vol payload");
}

void write_vol(std::ostream& os, const LabelVolume& v) {
  put_header(os, VolDtype::i32, Shape4::from(v.shape, 1), v.spacing);
  os.write(reinterpret_cast<const char*>(v.data.data()),
           static_cast<std::streamsize>(v.voxels() * sizeof(std::int32_t)));
  if (!os) throw IoError("failed writing .vol payload");
}

AnyVolume read_vol(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a NEUVOL01 file");
  const auto dtype = get<std::uint32_t>(is);
  Shape4 s;
  s.h = static_cast<Index>(get<std::uint64_t>(is));
  s.w = static_cast<Index>(get<std::uint64_t>(is));
  s.d = static_cast<Index>(get<std::uint64_t>(is));
  s.c = static_cast<Index>(get<std::uint64_t>(is));
  Spacing3 spacing;
  for (double& sp : spacing) sp = get<double>(is);

  if (dtype == static_cast<std::uint32_t>(VolDtype::f32)) {
    Volume4<float>::Buffer buf(s.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
    if (!is) throw IoError("truncated .vol payload");
    return Volume4<float>(s, spacing, std::move(buf));
  }
  if (dtype == static_cast<std::uint32_t>(VolDtype::i32)) {
    if (s.c != 1) throw IoError("i32 .vol must have a single channel");
    LabelVolume::Buffer buf(s.voxels());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(s.voxels() * sizeof(std::int32_t)));
    if (!is) throw IoError("truncated .vol payload");
    const int classes = buf.size() ? std::max(1, buf.maxCoeff() + 1) : 1;
    return LabelVolume(s.spatial(), classes, spacing, std::move(buf));
  }
  throw IoError("unknown .vol dtype tag " + std::to_string(dtype));
}

namespace {

template <typename V>
void save_impl(const std::filesystem::path& path, const V& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_vol(os, v);
}

AnyVolume load_any(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read_vol(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_vol(const std::filesystem::path& path, const Volume4<float>& v) { save_impl(path, v); }
void save_vol(const std::filesystem::path& path, const LabelVolume& v) { save_impl(path, v); }

Volume4<float> load_image(const std::filesystem::path& path) {
  auto any = load_any(path);
  if (auto* v = std::get_if<Volume4<float>>(&any)) return std::move(*v);
  throw IoError(path.string() + ": expected an f32 volume");
}

LabelVolume load_labels(const std::filesystem::path& path, int num_classes) {
  auto any = load_any(path);
  auto* v = std::get_if<LabelVolume>(&any);
  if (!v) throw IoError(path.string() + ": expected an i32 label volume");
  if (num_classes > 0) {
    v->num_classes = num_classes;
    v->validate();
  }
  return std::move(*v);
}

}  // namespace neunet
