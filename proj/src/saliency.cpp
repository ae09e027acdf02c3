#include "ctxr/saliency.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace ctxr {

SaliencyMap SaliencyMap::crop(const Rect& r) const {
  if (!r.inside(width(), height())) throw std::out_of_range("crop " + to_string(r) + " outside saliency map");
  return SaliencyMap(values_.block(r.y0, r.x0, r.height(), r.width()));
}

SaliencyMap compute_saliency(const FeatureMap& map) {
  if (!map.rectified())
    throw std::invalid_argument("saliency needs a rectified (post-ReLU) feature map");
  SaliencyMap::Array sum = SaliencyMap::Array::Zero(map.height(), map.width());
  for (Index k = 0; k < map.channels(); ++k) sum += map.channel(k).cast<double>().array();
  const double peak = sum.maxCoeff();
  if (peak > 0.0) sum /= peak;
  return SaliencyMap(std::move(sum));
}

double region_weight(const SaliencyMap& m, const Rect& region) {
  if (!region.inside(m.width(), m.height()))
    throw std::out_of_range("region " + to_string(region) + " outside saliency map");
  return m.values().block(region.y0, region.x0, region.height(), region.width()).maxCoeff();
}

BinaryMap binarize(const SaliencyMap& m, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  return BinaryMap(m.values() > tau);
}

BinaryMap resize_binary(const BinaryMap& b, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) throw std::invalid_argument("target dims must be >= 1");
  BinaryMap out(target_width, target_height);
  for (int y = 0; y < target_height; ++y) {
    const int sy = static_cast<int>((2L * y + 1) * b.height() / (2L * target_height));
    for (int x = 0; x < target_width; ++x) {
      const int sx = static_cast<int>((2L * x + 1) * b.width() / (2L * target_width));
      out.set(x, y, b(sx, sy));
    }
  }
  return out;
}

std::vector<Component> label_components(const BinaryMap& b, long min_area) {
  const int w = b.width(), h = b.height();
  std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  std::vector<Component> out;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!b(x, y) || seen[static_cast<std::size_t>(y) * w + x]) continue;
      Component c{{x, y, x + 1, y + 1}, 0};
      seen[static_cast<std::size_t>(y) * w + x] = 1;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.area;
        c.box = bounding_union(c.box, {cx, cy, cx + 1, cy + 1});
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            auto& mark = seen[static_cast<std::size_t>(ny) * w + nx];
            if (mark || !b(nx, ny)) continue;
            mark = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      if (c.area >= min_area) out.push_back(c);
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
    return std::tuple(-a.box.area(), a.box.y0, a.box.x0) < std::tuple(-b.box.area(), b.box.y0, b.box.x0);
  });
  return out;
}

std::vector<Rect> connected_components(const BinaryMap& b, long min_area) {
  std::vector<Rect> boxes;
  for (const Component& c : label_components(b, min_area)) boxes.push_back(c.box);
  return boxes;
}

}  // namespace ctxr
