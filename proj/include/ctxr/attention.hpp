#pragma once

#include "ctxr/saliency.hpp"
#include "ctxr/tensor.hpp"

namespace ctxr {

/// Parameters of the attenuation curve g(a) = lambda1 + lambda2 * a^phi.
struct AttentionParams {
  double lambda1 = 0.5;  // maximum attenuation (floor of g)
  double lambda2 = 0.4;
  double phi = 4.0;

  /// Throws std::invalid_argument unless lambda1, lambda2 in (0,1), lambda1 + lambda2 < 1, phi > 0.
  void validate() const;
};

/// Attenuation for saliency a in [0, 1].
double attenuation(double a, const AttentionParams& params = {});

/// Per-location multiplier applied to every channel: 1 inside the projected ROI,
/// g(M_p) outside. Indexed (x, y).
class AttentionMask {
 public:
  using Array = SaliencyMap::Array;

  AttentionMask() = default;
  explicit AttentionMask(Array multipliers) : multipliers_(std::move(multipliers)) {}

  int width() const { return static_cast<int>(multipliers_.cols()); }
  int height() const { return static_cast<int>(multipliers_.rows()); }
  double operator()(int x, int y) const { return multipliers_(y, x); }
  const Array& multipliers() const { return multipliers_; }

 private:
  Array multipliers_;
};

AttentionMask build_mask(const SaliencyMap& saliency, const Rect& roi_projection,
                         const AttentionParams& params = {});

/// X~_{k,p} = mask(p) * X_{k,p} for every channel k. Keeps the rectified flag.
FeatureMap modulate(const FeatureMap& map, const AttentionMask& mask);

}  // namespace ctxr
