#include "ctxr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace ctxr {

Image::Image(FeatureMap planes) : planes_(std::move(planes)) {
  if (planes_.channels() != 3) throw std::invalid_argument("image must have 3 channels");
  planes_.set_rectified(false);
}

void Image::validate() const {
  if (empty()) throw std::invalid_argument("empty image");
  const auto& v = planes_.values().array();
  if (!v.allFinite() || (v < 0.0f).any() || (v > 1.0f).any())
    throw std::invalid_argument("image values must lie in [0, 1]");
}

std::pair<int, int> scaled_size(int width, int height, int long_side) {
  if (width < 1 || height < 1 || long_side < 1)
    throw std::invalid_argument("scaled_size needs positive dimensions");
  const bool landscape = width >= height;
  const double ratio = landscape ? static_cast<double>(height) / width
                                 : static_cast<double>(width) / height;
  const int short_side = std::max(1, static_cast<int>(std::lround(ratio * long_side)));
  return landscape ? std::pair{long_side, short_side} : std::pair{short_side, long_side};
}

namespace {

struct Tap {
  int lo;
  int hi;
  float frac;
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, static_cast<float>(s - lo)};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("resize target must be >= 1x1");
  if (width == img.width() && height == img.height()) return img;

  const auto xs = bilinear_taps(img.width(), width);
  const auto ys = bilinear_taps(img.height(), height);
  Image out(width, height);
  for (int c = 0; c < 3; ++c) {
    const auto src = img.planes().channel(c);
    for (int y = 0; y < height; ++y) {
      const Tap ty = ys[static_cast<std::size_t>(y)];
      for (int x = 0; x < width; ++x) {
        const Tap tx = xs[static_cast<std::size_t>(x)];
        const float top = src(ty.lo, tx.lo) + tx.frac * (src(ty.lo, tx.hi) - src(ty.lo, tx.lo));
        const float bot = src(ty.hi, tx.lo) + tx.frac * (src(ty.hi, tx.hi) - src(ty.hi, tx.lo));
        out(x, y, c) = std::clamp(top + ty.frac * (bot - top), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Rect scale_rect(const Rect& r, int src_w, int src_h, int dst_w, int dst_h) {
  const double sx = static_cast<double>(dst_w) / src_w;
  const double sy = static_cast<double>(dst_h) / src_h;
  Rect out{static_cast<int>(std::floor(r.x0 * sx)), static_cast<int>(std::floor(r.y0 * sy)),
           static_cast<int>(std::ceil(r.x1 * sx)), static_cast<int>(std::ceil(r.y1 * sy))};
  out.x0 = std::clamp(out.x0, 0, dst_w - 1);
  out.y0 = std::clamp(out.y0, 0, dst_h - 1);
  out.x1 = std::clamp(out.x1, out.x0 + 1, dst_w);
  out.y1 = std::clamp(out.y1, out.y0 + 1, dst_h);
  return out;
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<unsigned char>(
            std::lround(std::clamp(img(x, y, c), 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::ios_base::failure("PPM write failed: " + path.string());
}

namespace {

void skip_ppm_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw FormatError(path.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  skip_ppm_space(in);
  in >> w;
  skip_ppm_space(in);
  in >> h;
  skip_ppm_space(in);
  in >> maxval;
  if (!in || w < 1 || h < 1 || maxval != 255)
    throw FormatError(path.string() + ": unsupported PPM header");
  in.get();
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw FormatError(path.string() + ": truncated PPM payload");
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img(x, y, c) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
  return img;
}

}  // namespace ctxr
