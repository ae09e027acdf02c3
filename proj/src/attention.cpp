#include "ctxr/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxr {

void AttentionParams::validate() const {
  if (!(lambda1 > 0.0 && lambda1 < 1.0)) throw std::invalid_argument("lambda1 must lie in (0, 1)");
  if (!(lambda2 > 0.0 && lambda2 < 1.0)) throw std::invalid_argument("lambda2 must lie in (0, 1)");
  if (!(lambda1 + lambda2 < 1.0)) throw std::invalid_argument("lambda1 + lambda2 must stay below 1");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw std::invalid_argument("phi must be positive");
}

double attenuation(double a, const AttentionParams& params) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("attention level must lie in [0, 1]");
  return params.lambda1 + params.lambda2 * std::pow(a, params.phi);
}

AttentionMask build_mask(const SaliencyMap& saliency, const Rect& roi_projection,
                         const AttentionParams& params) {
  params.validate();
  if (!roi_projection.inside(saliency.width(), saliency.height()))
    throw std::invalid_argument("ROI projection " + to_string(roi_projection) +
                                " does not fit the saliency grid");
  AttentionMask::Array m(saliency.height(), saliency.width());
  for (int y = 0; y < saliency.height(); ++y)
    for (int x = 0; x < saliency.width(); ++x)
      m(y, x) = roi_projection.contains(x, y) ? 1.0 : attenuation(saliency(x, y), params);
  return AttentionMask(std::move(m));
}

FeatureMap modulate(const FeatureMap& map, const AttentionMask& mask) {
  if (mask.width() != map.width() || mask.height() != map.height())
    throw std::invalid_argument("attention mask and feature map differ in spatial size");
  FeatureMap out = map;
  for (Index k = 0; k < map.channels(); ++k) {
    auto plane = out.channel(k);
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x)
        plane(y, x) = static_cast<float>(mask(x, y) * plane(y, x));
  }
  return out;
}

}  // namespace ctxr
