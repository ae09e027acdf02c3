#pragma once

#include <vector>

#include "ctxr/tensor.hpp"

namespace ctxr {

/// Max-normalized channel-sum of a rectified feature map, values in [0, 1].
///
/// Indexed (x, y); storage is an H x W array so rows follow the feature-map rows.
class SaliencyMap {
 public:
  using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SaliencyMap() = default;
  explicit SaliencyMap(Array values) : values_(std::move(values)) {}

  int width() const { return static_cast<int>(values_.cols()); }
  int height() const { return static_cast<int>(values_.rows()); }
  double operator()(int x, int y) const { return values_(y, x); }
  const Array& values() const { return values_; }

  /// Restriction to `r`, keeping the original values (no renormalization).
  SaliencyMap crop(const Rect& r) const;

 private:
  Array values_;
};

class BinaryMap {
 public:
  using Array = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BinaryMap() = default;
  BinaryMap(int width, int height) : values_(Array::Constant(height, width, false)) {}
  explicit BinaryMap(Array values) : values_(std::move(values)) {}

  int width() const { return static_cast<int>(values_.cols()); }
  int height() const { return static_cast<int>(values_.rows()); }
  bool operator()(int x, int y) const { return values_(y, x); }
  void set(int x, int y, bool v) { values_(y, x) = v; }
  const Array& values() const { return values_; }
  long count() const { return values_.count(); }

  friend bool operator==(const BinaryMap& a, const BinaryMap& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           (a.values_ == b.values_).all();
  }

 private:
  Array values_;
};

/// M_p = sum_k X_{k,p} / max_q sum_k X_{k,q}; an all-zero map stays zero.
/// Throws std::invalid_argument unless the map is flagged rectified.
SaliencyMap compute_saliency(const FeatureMap& map);

/// Largest saliency value inside the region.
double region_weight(const SaliencyMap& m, const Rect& region);

/// Cells with saliency strictly greater than tau.
BinaryMap binarize(const SaliencyMap& m, double tau);

/// Nearest-neighbour resampling: each target cell copies the source cell containing its center.
BinaryMap resize_binary(const BinaryMap& b, int target_width, int target_height);

struct Component {
  Rect box;
  long area = 0;  // member cells
};

/// 8-connected components of the true cells, largest first, ties by row-major box origin.
/// Components with fewer than `min_area` cells are dropped.
std::vector<Component> label_components(const BinaryMap& b, long min_area = 1);

/// Bounding boxes of label_components().
std::vector<Rect> connected_components(const BinaryMap& b, long min_area = 1);

}  // namespace ctxr
