#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "ctxr/eval.hpp"

namespace ctxr {

namespace {

// Portable draws: std distributions differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return std::min(hi, lo + static_cast<int>(uniform() * (hi - lo + 1)));
  }

 private:
  std::mt19937_64 engine_;
};

using Color = std::array<float, 3>;

Color hsv(double h, double s, double v) {
  h = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  const std::array<std::array<double, 3>, 6> rgb{{{v, t, p}, {q, v, p}, {p, v, t}, {p, q, v}, {t, p, v}, {v, p, q}}};
  return {static_cast<float>(rgb[i][0]), static_cast<float>(rgb[i][1]), static_cast<float>(rgb[i][2])};
}

enum Shape { Disk, Square, Diamond, Triangle, Ring, Cross, kShapeCount };
enum Texture { HStripes, VStripes, Checker, Diagonal, kTextureCount };

struct Appearance {
  int shape = Square;
  int texture = Checker;
  int cycles = 4;  // texture periods across the object
  Color fg{};
  Color bg{};
};

bool inside_shape(int shape, double u, double v) {
  switch (shape) {
    case Disk: return u * u + v * v <= 1.0;
    case Square: return true;
    case Diamond: return std::abs(u) + std::abs(v) <= 1.0;
    case Triangle: return std::abs(u) <= (v + 1.0) / 2.0;
    case Ring: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.2;
    }
    case Cross: return std::abs(u) < 0.38 || std::abs(v) < 0.38;
  }
  return false;
}

bool texture_on(int texture, int x, int y, int period) {
  const int half = std::max(1, period / 2);
  switch (texture) {
    case HStripes: return (y / half) % 2 == 0;
    case VStripes: return (x / half) % 2 == 0;
    case Checker: return ((x / half) + (y / half)) % 2 == 0;
    case Diagonal: return ((x + y) / half) % 2 == 0;
  }
  return true;
}

void draw(Image& img, const Rect& box, const Appearance& a) {
  const double cx = (box.x0 + box.x1) / 2.0, cy = (box.y0 + box.y1) / 2.0;
  const double hw = box.width() / 2.0, hh = box.height() / 2.0;
  const int period = std::max(2, std::min(box.width(), box.height()) / a.cycles);
  for (int y = std::max(0, box.y0); y < std::min(img.height(), box.y1); ++y) {
    for (int x = std::max(0, box.x0); x < std::min(img.width(), box.x1); ++x) {
      const double u = (x + 0.5 - cx) / hw, v = (y + 0.5 - cy) / hh;
      if (!inside_shape(a.shape, u, v)) continue;
      const Color& c = texture_on(a.texture, x - box.x0, y - box.y0, period) ? a.fg : a.bg;
      for (int ch = 0; ch < 3; ++ch) img(x, y, ch) = c[static_cast<std::size_t>(ch)];
    }
  }
}

void draw_background(Image& img, Rng& rng) {
  Color base{};
  for (float& c : base) c = static_cast<float>(rng.uniform(0.02, 0.12));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int ch = 0; ch < 3; ++ch)
        img(x, y, ch) = std::clamp(base[static_cast<std::size_t>(ch)] + static_cast<float>(rng.uniform(-0.04, 0.04)),
                                   0.0f, 1.0f);
  const int clutter = rng.integer(6, 10);
  for (int i = 0; i < clutter; ++i) {
    const int w = rng.integer(5, 16), h = rng.integer(5, 16);
    const int x = rng.integer(0, img.width() - w), y = rng.integer(0, img.height() - h);
    Appearance a;
    a.shape = rng.integer(0, kShapeCount - 1);
    a.texture = rng.integer(0, kTextureCount - 1);
    a.cycles = rng.integer(2, 4);
    a.fg = hsv(rng.uniform(), rng.uniform(0.2, 0.6), rng.uniform(0.15, 0.35));
    a.bg = hsv(rng.uniform(), rng.uniform(0.2, 0.6), rng.uniform(0.05, 0.2));
    draw(img, {x, y, x + w, y + h}, a);
  }
}

enum class Side { Right, Left, Below, Above };

// Landmark box plus an adjacent companion box, both inside the image.
std::pair<Rect, Rect> place_pair(Rng& rng, int img_w, int img_h, int side_px, int comp_px, Side side) {
  const int gap = rng.integer(1, 3);
  int total_w = side_px, total_h = side_px;
  if (side == Side::Right || side == Side::Left) total_w += gap + comp_px;
  else total_h += gap + comp_px;
  const int ox = rng.integer(2, std::max(2, img_w - total_w - 2));
  const int oy = rng.integer(2, std::max(2, img_h - total_h - 2));
  const int comp_off = (side_px - comp_px) / 2 + rng.integer(-2, 2);
  Rect landmark, companion;
  switch (side) {
    case Side::Right:
      landmark = {ox, oy, ox + side_px, oy + side_px};
      companion = {landmark.x1 + gap, oy + comp_off, landmark.x1 + gap + comp_px, oy + comp_off + comp_px};
      break;
    case Side::Left:
      companion = {ox, oy + comp_off, ox + comp_px, oy + comp_off + comp_px};
      landmark = {companion.x1 + gap, oy, companion.x1 + gap + side_px, oy + side_px};
      break;
    case Side::Below:
      landmark = {ox, oy, ox + side_px, oy + side_px};
      companion = {ox + comp_off, landmark.y1 + gap, ox + comp_off + comp_px, landmark.y1 + gap + comp_px};
      break;
    case Side::Above:
      companion = {ox + comp_off, oy, ox + comp_off + comp_px, oy + comp_px};
      landmark = {ox, companion.y1 + gap, ox + side_px, companion.y1 + gap + side_px};
      break;
  }
  const auto clip = [&](Rect r) {
    return Rect{std::max(r.x0, 0), std::max(r.y0, 0), std::min(r.x1, img_w), std::min(r.y1, img_h)};
  };
  return {clip(landmark), clip(companion)};
}

}  // namespace

SyntheticDataset generate_synthetic(std::uint64_t seed, int n_images, const SyntheticConfig& config) {
  if (n_images < 20) throw std::invalid_argument("synthetic dataset needs at least 20 images");
  if (config.n_queries < 1) throw std::invalid_argument("synthetic dataset needs at least one query");
  if (config.width < 64 || config.height < 64) throw std::invalid_argument("synthetic images must be >= 64x64");
  const int n_classes = config.n_queries;
  const int per_class = (n_images * 4 / 5) / n_classes;
  if (per_class < 3)
    throw std::invalid_argument("too many queries for " + std::to_string(n_images) +
                                " images: each class needs 3 images (query, positive, look-alike)");
  const int positives = std::max(2, (per_class * 3 + 4) / 5);
  const int lookalikes = per_class - positives;

  Rng rng(seed);

  std::vector<Appearance> landmark(static_cast<std::size_t>(n_classes));
  std::vector<Appearance> companion(static_cast<std::size_t>(n_classes));
  std::vector<Side> companion_side(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    Appearance& a = landmark[static_cast<std::size_t>(c)];
    a.shape = c % kShapeCount;
    a.texture = (c + c / kShapeCount) % kTextureCount;
    a.cycles = rng.integer(3, 5);
    const double hue = (c + rng.uniform(0.0, 0.5)) / n_classes;
    a.fg = hsv(hue, rng.uniform(0.6, 1.0), rng.uniform(0.85, 1.0));
    a.bg = hsv(hue + 0.5, rng.uniform(0.4, 0.8), rng.uniform(0.35, 0.55));

    Appearance& k = companion[static_cast<std::size_t>(c)];
    k.shape = Square;
    k.texture = rng.integer(0, kTextureCount - 1);
    k.cycles = rng.integer(2, 4);
    const double khue = rng.uniform();
    k.fg = hsv(khue, rng.uniform(0.7, 1.0), rng.uniform(0.8, 1.0));
    k.bg = hsv(khue + 0.33, rng.uniform(0.5, 1.0), rng.uniform(0.3, 0.5));
    companion_side[static_cast<std::size_t>(c)] = static_cast<Side>(rng.integer(0, 3));
  }

  // Decoy companions travel with look-alike landmarks; never equal to the class's own.
  const auto decoy = [&](int c) {
    Appearance k = companion[static_cast<std::size_t>(c)];
    k.shape = rng.integer(0, 1) == 0 ? Square : Disk;
    k.texture = (k.texture + rng.integer(1, kTextureCount - 1)) % kTextureCount;
    k.cycles = rng.integer(2, 4);
    const double hue = rng.uniform();
    k.fg = hsv(hue, rng.uniform(0.7, 1.0), rng.uniform(0.8, 1.0));
    k.bg = hsv(hue + 0.5, rng.uniform(0.5, 1.0), rng.uniform(0.3, 0.5));
    return k;
  };

  struct Plan {
    SyntheticImageInfo::Role role;
    int cls;
  };
  std::vector<Plan> plans;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < positives; ++i) plans.push_back({SyntheticImageInfo::Role::Positive, c});
    for (int i = 0; i < lookalikes; ++i) plans.push_back({SyntheticImageInfo::Role::LookAlike, c});
  }
  while (static_cast<int>(plans.size()) < n_images) plans.push_back({SyntheticImageInfo::Role::Filler, -1});
  for (std::size_t i = plans.size() - 1; i > 0; --i)
    std::swap(plans[i], plans[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i)))]);

  SyntheticDataset ds;
  const int w = config.width, h = config.height;
  for (std::size_t n = 0; n < plans.size(); ++n) {
    const Plan& plan = plans[n];
    Image img(w, h);
    draw_background(img, rng);

    SyntheticImageInfo info;
    info.role = plan.role;
    info.landmark_class = plan.cls;
    const int side_px = static_cast<int>(std::lround(rng.uniform(0.30, 0.38) * std::min(w, h)));
    const int comp_px = static_cast<int>(std::lround(side_px * rng.uniform(0.6, 0.7)));

    if (plan.role == SyntheticImageInfo::Role::Filler) {
      Appearance a;
      a.shape = rng.integer(0, kShapeCount - 1);
      a.texture = rng.integer(0, kTextureCount - 1);
      a.cycles = rng.integer(2, 6);
      const double hue = rng.uniform();
      a.fg = hsv(hue, rng.uniform(0.3, 0.9), rng.uniform(0.6, 0.9));
      a.bg = hsv(hue + rng.uniform(0.2, 0.8), rng.uniform(0.3, 0.9), rng.uniform(0.2, 0.5));
      const int x = rng.integer(2, w - side_px - 2), y = rng.integer(2, h - side_px - 2);
      info.landmark = {x, y, x + side_px, y + side_px};
      draw(img, info.landmark, a);
    } else {
      const auto c = static_cast<std::size_t>(plan.cls);
      const Side side = config.facilitatory_context ? companion_side[c] : static_cast<Side>(rng.integer(0, 3));
      auto [lm, comp] = place_pair(rng, w, h, side_px, comp_px, side);
      info.landmark = lm;
      draw(img, lm, landmark[c]);
      if (config.facilitatory_context) {
        info.companion = comp;
        draw(img, comp, plan.role == SyntheticImageInfo::Role::Positive ? companion[c] : decoy(plan.cls));
      }
    }

    // 8-bit quantization so the in-memory image equals its PPM round trip
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) img(x, y, ch) = static_cast<float>(std::lround(img(x, y, ch) * 255.0f)) / 255.0f;

    char id[32];
    std::snprintf(id, sizeof id, "img%04zu", n);
    ds.manifest.images.push_back({id, std::string("images/") + id + ".ppm", w, h});
    ds.images.push_back(std::move(img));
    ds.info.push_back(info);
  }

  for (int c = 0; c < n_classes; ++c) {
    QueryEntry q;
    char qid[32];
    std::snprintf(qid, sizeof qid, "q%02d", c);
    q.id = qid;
    for (std::size_t n = 0; n < ds.info.size(); ++n) {
      const auto& info = ds.info[n];
      if (info.landmark_class != c || info.role != SyntheticImageInfo::Role::Positive) continue;
      if (q.image.empty()) {
        q.image = ds.manifest.images[n].id;
        q.roi = info.landmark;
      }
      q.positive.push_back(ds.manifest.images[n].id);
    }
    ds.manifest.queries.push_back(std::move(q));
  }
  ds.manifest.validate();
  return ds;
}

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < dataset.images.size(); ++i)
    save_ppm(dataset.images[i], dir / dataset.manifest.images[i].path);
  save_manifest(dataset.manifest, dir / "manifest.json");
}

}  // namespace ctxr
