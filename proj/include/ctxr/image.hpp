#pragma once

#include <filesystem>
#include <utility>

#include "ctxr/tensor.hpp"

namespace ctxr {

/// RGB image with channel values in [0, 1], stored planar like a 3-channel FeatureMap.
class Image {
 public:
  Image() = default;
  Image(int width, int height) : planes_(width, height, 3) {}
  explicit Image(FeatureMap planes);

  int width() const { return static_cast<int>(planes_.width()); }
  int height() const { return static_cast<int>(planes_.height()); }
  bool empty() const { return planes_.empty(); }

  float& operator()(int x, int y, int c) { return planes_(x, y, c); }
  float operator()(int x, int y, int c) const { return planes_(x, y, c); }

  const FeatureMap& planes() const { return planes_; }
  Rect bounds() const { return {0, 0, width(), height()}; }

  /// Throws std::invalid_argument when a value lies outside [0, 1].
  void validate() const;

  Image crop(const Rect& r) const { return Image(planes_.crop(r)); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  FeatureMap planes_;
};

/// Size with the longer side equal to `long_side`, aspect ratio kept (short side rounded, >= 1).
std::pair<int, int> scaled_size(int width, int height, int long_side);

/// Bilinear resampling with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& img, int width, int height);

/// Maps a pixel rect through a resize from (src_w, src_h) to (dst_w, dst_h), rounding outward.
Rect scale_rect(const Rect& r, int src_w, int src_h, int dst_w, int dst_h);

/// Binary PPM (P6, maxval 255).
void save_ppm(const Image& img, const std::filesystem::path& path);
Image load_ppm(const std::filesystem::path& path);

}  // namespace ctxr
