#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ctxr {

using Index = Eigen::Index;

/// Malformed or truncated binary/text input.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-open integer rectangle [x0,x1) x [y0,y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  constexpr int width() const { return x1 - x0; }
  constexpr int height() const { return y1 - y0; }
  constexpr long area() const { return static_cast<long>(width()) * height(); }
  constexpr bool empty() const { return x1 <= x0 || y1 <= y0; }
  constexpr bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  constexpr bool inside(int w, int h) const {
    return !empty() && x0 >= 0 && y0 >= 0 && x1 <= w && y1 <= h;
  }
  constexpr Rect translated(int dx, int dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

/// Smallest rectangle containing both.
constexpr Rect bounding_union(const Rect& a, const Rect& b) {
  return {a.x0 < b.x0 ? a.x0 : b.x0, a.y0 < b.y0 ? a.y0 : b.y0,
          a.x1 > b.x1 ? a.x1 : b.x1, a.y1 > b.y1 ? a.y1 : b.y1};
}

std::string to_string(const Rect& r);

/// Dense W x H x K tensor, channel-major storage ((k, y, x) slowest to fastest).
///
/// The layout matches the FMAP payload so a channel is one contiguous
/// H x W row-major block.
template <typename Scalar>
class Tensor3 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneMap = Eigen::Map<Plane>;
  using ConstPlaneMap = Eigen::Map<const Plane>;

  Tensor3() = default;

  Tensor3(Index width, Index height, Index channels, Scalar fill = Scalar(0))
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1)
      throw std::invalid_argument("tensor dimensions must be >= 1");
    data_ = Vector::Constant(width * height * channels, fill);
  }

  Index width() const { return width_; }
  Index height() const { return height_; }
  Index channels() const { return channels_; }
  Index size() const { return data_.size(); }
  Index plane_size() const { return width_ * height_; }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(Index x, Index y, Index k) { return data_[(k * height_ + y) * width_ + x]; }
  Scalar operator()(Index x, Index y, Index k) const {
    return data_[(k * height_ + y) * width_ + x];
  }

  PlaneMap channel(Index k) { return PlaneMap(data_.data() + k * plane_size(), height_, width_); }
  ConstPlaneMap channel(Index k) const {
    return ConstPlaneMap(data_.data() + k * plane_size(), height_, width_);
  }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Post-activation flag: every value is known to be >= 0.
  bool rectified() const { return rectified_; }
  void set_rectified(bool r) { rectified_ = r; }

  bool all_finite() const { return data_.allFinite(); }

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const {
    if (empty()) throw std::invalid_argument("empty tensor");
    if (!all_finite()) throw std::invalid_argument("tensor contains non-finite values");
    if (rectified_ && (data_.array() < Scalar(0)).any())
      throw std::invalid_argument("tensor flagged rectified holds negative values");
  }

  /// Spatial sub-tensor over `r`, all channels.
  Tensor3 crop(const Rect& r) const {
    if (!r.inside(static_cast<int>(width_), static_cast<int>(height_)))
      throw std::out_of_range("crop rect " + to_string(r) + " outside tensor");
    Tensor3 out(r.width(), r.height(), channels_);
    for (Index k = 0; k < channels_; ++k)
      out.channel(k) = channel(k).block(r.y0, r.x0, r.height(), r.width());
    out.rectified_ = rectified_;
    return out;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
           a.rectified_ == b.rectified_ && a.data_ == b.data_;
  }

 private:
  Index width_ = 0;
  Index height_ = 0;
  Index channels_ = 0;
  Vector data_;
  bool rectified_ = false;
};

/// Activation tensor exchanged between every stage.
using FeatureMap = Tensor3<float>;

/// Global image descriptor; unit-norm or exactly zero.
using Descriptor = Eigen::VectorXd;

inline constexpr double kNormEpsilon = 1e-12;

/// Unit l2 vector, or the input unchanged when its norm is <= 1e-12.
template <typename Derived>
typename Derived::PlainObject l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  using Real = typename Derived::RealScalar;
  const Real n = v.norm();
  if (!(n > Real(kNormEpsilon))) return v;
  return v / n;
}

// FMAP binary format (little-endian):
//   "FMAP" | u32 version=1 | u32 W | u32 H | u32 K | W*H*K f32 (k,y,x order) | u8 flags
// flags bit 0 = rectified.
inline constexpr std::uint32_t kFmapVersion = 1;

void write_fmap(const FeatureMap& map, std::ostream& out);
FeatureMap read_fmap(std::istream& in);

void save_fmap(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap load_fmap(const std::filesystem::path& path);

}  // namespace ctxr
