#include "ctxr/tensor.hpp"

#include <fstream>
#include <limits>

#include "ctxr/binary_io.hpp"

namespace ctxr {

std::string to_string(const Rect& r) {
  return "[" + std::to_string(r.x0) + "," + std::to_string(r.x1) + ")x[" + std::to_string(r.y0) +
         "," + std::to_string(r.y1) + ")";
}

void write_fmap(const FeatureMap& map, std::ostream& out) {
  map.validate();
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (map.width() > kMax || map.height() > kMax || map.channels() > kMax)
    throw std::invalid_argument("tensor too large for FMAP");

  binary::put_magic(out, "FMAP");
  binary::put_u32(out, kFmapVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(map.width()));
  binary::put_u32(out, static_cast<std::uint32_t>(map.height()));
  binary::put_u32(out, static_cast<std::uint32_t>(map.channels()));
  for (Index i = 0; i < map.size(); ++i) binary::put_f32(out, map.data()[i]);
  const char flags = map.rectified() ? 1 : 0;
  out.write(&flags, 1);
  if (!out) throw std::ios_base::failure("FMAP write failed");
}

FeatureMap read_fmap(std::istream& in) {
  binary::expect_magic(in, "FMAP");
  const auto version = binary::get_u32(in, "FMAP version");
  if (version != kFmapVersion)
    throw FormatError("unsupported FMAP version " + std::to_string(version));
  const auto w = binary::get_u32(in, "FMAP width");
  const auto h = binary::get_u32(in, "FMAP height");
  const auto k = binary::get_u32(in, "FMAP channels");
  if (w == 0 || h == 0 || k == 0) throw FormatError("FMAP dimensions must be >= 1");

  const std::uint64_t count = std::uint64_t{w} * h * k;
  if (count > (std::uint64_t{1} << 34)) throw FormatError("FMAP element count implausibly large");

  FeatureMap map(w, h, k);
  for (std::uint64_t i = 0; i < count; ++i) map.data()[i] = binary::get_f32(in, "FMAP payload");
  char flags = 0;
  binary::read_exact(in, &flags, 1, "FMAP flags");
  if ((static_cast<unsigned char>(flags) & ~1u) != 0) throw FormatError("unknown FMAP flag bits");
  map.set_rectified((flags & 1) != 0);
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after FMAP payload (dimension/length mismatch)");

  if (!map.all_finite()) throw FormatError("FMAP payload contains non-finite values");
  if (map.rectified() && (map.values().array() < 0.0f).any())
    throw FormatError("FMAP flagged rectified holds negative values");
  return map;
}

void save_fmap(const FeatureMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  write_fmap(map, out);
}

FeatureMap load_fmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_fmap(in);
}

}  // namespace ctxr
