// One PASS/FAIL line per acceptance property; exit status 1 when any fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctxr/experiment.hpp"

using namespace ctxr;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    o.ok = false;
    o.detail += " [over time budget]";
  }
  if (!o.ok) ++failures;
  std::printf("%s  %-28s %7.3fs / %4.0fs  %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), secs, budget_s,
              o.detail.c_str());
  std::fflush(stdout);
}

/// Collects failed sub-checks; the first few are kept verbatim.
struct Checks {
  long run = 0;
  long failed = 0;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    ++run;
    if (cond) return;
    ++failed;
    if (notes.size() < 4) notes.push_back(what);
  }

  Outcome outcome(const std::string& summary) const {
    std::string d = summary + " (" + std::to_string(run - failed) + "/" + std::to_string(run) + " checks)";
    for (const auto& n : notes) d += "; " + n;
    return {failed == 0, d};
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

FeatureMap random_rectified(std::mt19937_64& rng, int w, int h, int k, double zero_fraction = 0.3) {
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::bernoulli_distribution zero(zero_fraction);
  FeatureMap m(w, h, k);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = zero(rng) ? 0.0f : val(rng);
  m.set_rectified(true);
  return m;
}

Image random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  Image img(w, h);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img(x, y, c) = val(rng);
  return img;
}

PcaModel random_pca(std::mt19937_64& rng, int k, int k_out) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd mix(k, k);
  for (Index i = 0; i < mix.size(); ++i) mix.data()[i] = n01(rng);
  Eigen::MatrixXd samples(2000, k);
  for (Index i = 0; i < samples.size(); ++i) samples.data()[i] = n01(rng);
  samples = (samples * mix).eval();
  samples.array() += 0.5;
  return fit_pca(samples, k_out, "acceptance random mixture");
}

// ---------------------------------------------------------------------------

Outcome attention_algebra() {
  Checks c;
  const AttentionParams p;
  c.expect(attenuation(0.0, p) == 0.5, "g(0) = " + fmt(attenuation(0.0, p)));
  c.expect(attenuation(1.0, p) == 0.9, "g(1) = " + fmt(attenuation(1.0, p)));
  double prev = attenuation(0.0, p);
  for (int i = 1; i <= 1000; ++i) {
    const double g = attenuation(i / 1000.0, p);
    c.expect(g >= prev, "g decreases at a=" + fmt(i / 1000.0));
    prev = g;
  }

  // Real attention-tap maps: toy network, random image, random ROIs.
  std::mt19937_64 rng(11);
  const NetworkSpec net = toy_network(3);
  for (const std::string tap : {"low", "mid", "final"}) {
    const int layer = net.tap(tap);
    for (int trial = 0; trial < 5; ++trial) {
      const Image img = random_image(rng, 64, 48);
      const FeatureMap x = forward(net, img, layer);
      std::uniform_int_distribution<int> ux(0, 63), uy(0, 47);
      int a = ux(rng), b = ux(rng), cy = uy(rng), d = uy(rng);
      const Rect roi{std::min(a, b), std::min(cy, d), std::max(a, b) + 1, std::max(cy, d) + 1};
      const Rect proj = project_roi(net, roi, layer, img.width(), img.height());
      const SaliencyMap m = compute_saliency(x);
      const FeatureMap y = modulate(x, build_mask(m, proj, p));
      for (Index k = 0; k < x.channels(); ++k)
        for (Index yy = 0; yy < x.height(); ++yy)
          for (Index xx = 0; xx < x.width(); ++xx) {
            const float orig = x(xx, yy, k), mod = y(xx, yy, k);
            if (proj.contains(static_cast<int>(xx), static_cast<int>(yy))) {
              c.expect(mod == orig, "inside value changed at tap " + tap);
            } else {
              // bounds as the float the modulation itself produces
              const float lo = static_cast<float>(0.5 * orig), hi = static_cast<float>(0.9 * orig);
              c.expect(mod >= lo && mod <= hi, "outside ratio out of [0.5, 0.9] at tap " + tap);
            }
          }
    }
  }
  return c.outcome("g(0)=0.5, g(1)=0.9, monotone on 1001 points, ROI bit-equal, outside in [0.5x, 0.9x]");
}

Outcome wrmac_uniform() {
  std::mt19937_64 rng(21);
  const PcaModel pca = random_pca(rng, 16, 16);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::uniform_int_distribution<int> dim(3, 20);
    FeatureMap m = random_rectified(rng, dim(rng), dim(rng), 16, 0.2);
    // rescale every location to the same channel sum so saliency is uniform
    for (Index y = 0; y < m.height(); ++y)
      for (Index x = 0; x < m.width(); ++x) {
        double s = 0;
        for (Index k = 0; k < m.channels(); ++k) s += m(x, y, k);
        if (s == 0) m(x, y, 0) = 1.0f, s = 1.0;
        for (Index k = 0; k < m.channels(); ++k) m(x, y, k) = static_cast<float>(m(x, y, k) / s * 3.0);
      }
    const Descriptor plain = encode(m, pca, {3, false});
    const Descriptor weighted = encode(m, pca, {3, true});
    worst = std::max(worst, (plain - weighted).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "max |WR-MAC - R-MAC| = " + fmt(worst) + " over 100 maps (limit 1e-6)"};
}

Outcome receptive_fields() {
  Checks c;
  NetworkSpec net = toy_network(5);
  {
    // strictly positive weights so no response can cancel
    std::vector<LayerSpec> layers = net.layers();
    for (auto& l : layers)
      for (float& w : l.weights) w = std::abs(w) + 0.01f;
    net = NetworkSpec(std::move(layers), net.taps());
  }
  const int n = 32;

  std::vector<std::pair<int, int>> sizes;
  for (int l = 1; l <= net.size(); ++l) sizes.push_back(output_size(net, l, n, n));

  for (int py = 0; py < n; ++py)
    for (int px = 0; px < n; ++px) {
      Image delta(n, n);
      for (int ch = 0; ch < 3; ++ch) delta(px, py, ch) = 1.0f;
      FeatureMap x = delta.planes();
      for (int l = 1; l <= net.size(); ++l) {
        x = forward(net, x, l, l);
        const RFParams rf = rf_params(net, l);
        const double half = (rf.size - 1) / 2.0;
        const auto [w, h] = sizes[static_cast<std::size_t>(l - 1)];
        bool match = true;
        for (int ay = 0; ay < h && match; ++ay)
          for (int ax = 0; ax < w && match; ++ax) {
            bool responds = false;
            for (Index k = 0; k < x.channels(); ++k) responds = responds || x(ax, ay, k) != 0.0f;
            const bool analytic = std::abs(px - rf.center(ax)) <= half && std::abs(py - rf.center(ay)) <= half;
            match = responds == analytic;
          }
        c.expect(match, "layer " + std::to_string(l) + " delta at (" + std::to_string(px) + "," +
                            std::to_string(py) + ")");
      }
    }

  // project_roi against the centre-inside set
  std::mt19937_64 rng(31);
  const NetworkSpec toy = toy_network(0);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> dim(16, 80);
    const int iw = dim(rng), ih = dim(rng);
    std::uniform_int_distribution<int> ux(0, iw - 1), uy(0, ih - 1);
    const int a = ux(rng), b = ux(rng), cc = uy(rng), d = uy(rng);
    const Rect roi{std::min(a, b), std::min(cc, d), std::max(a, b) + 1, std::max(cc, d) + 1};
    for (int l = 1; l <= toy.size(); ++l) {
      const RFParams rf = rf_params(toy, l);
      const auto [w, h] = output_size(toy, l, iw, ih);
      std::vector<int> xs, ys;
      for (int i = 0; i < w; ++i)
        if (rf.center(i) >= roi.x0 && rf.center(i) < roi.x1) xs.push_back(i);
      for (int i = 0; i < h; ++i)
        if (rf.center(i) >= roi.y0 && rf.center(i) < roi.y1) ys.push_back(i);
      Rect expected;
      if (!xs.empty() && !ys.empty()) {
        expected = {xs.front(), ys.front(), xs.back() + 1, ys.back() + 1};
      } else {
        const double cx = (roi.x0 + roi.x1) / 2.0, cy = (roi.y0 + roi.y1) / 2.0;
        int bx = 0, by = 0;
        for (int i = 1; i < w; ++i)
          if (std::abs(rf.center(i) - cx) < std::abs(rf.center(bx) - cx)) bx = i;
        for (int i = 1; i < h; ++i)
          if (std::abs(rf.center(i) - cy) < std::abs(rf.center(by) - cy)) by = i;
        expected = {bx, by, bx + 1, by + 1};
      }
      const Rect got = project_roi(toy, roi, l, iw, ih);
      c.expect(got == expected, "project " + to_string(roi) + " at layer " + std::to_string(l) + ": " +
                                    to_string(got) + " vs " + to_string(expected));
    }
  }
  return c.outcome("delta-image fields == rf_params on 32x32 for all 8 layers; 200 ROIs x 8 layers");
}

Outcome encoder_contracts() {
  Checks c;
  std::mt19937_64 rng(41);
  const PcaModel pca = random_pca(rng, 12, 8);

  // unit norm or zero
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<int> dim(1, 14);
    const double zeros = i % 10 == 0 ? 1.0 : (i % 3 == 0 ? 0.95 : 0.3);
    const FeatureMap m = random_rectified(rng, dim(rng), dim(rng), 12, zeros);
    for (const bool weighted : {false, true}) {
      const double n = encode(m, pca, {3, weighted}).norm();
      c.expect(n == 0.0 || std::abs(n - 1.0) <= 1e-6, "descriptor norm " + fmt(n));
    }
  }

  // MAC over the union of two grid regions
  for (int t = 0; t < 5; ++t) {
    const FeatureMap m = random_rectified(rng, 11 + t, 9, 6);
    const RegionGrid grid = rmac_grid(static_cast<int>(m.width()), static_cast<int>(m.height()), 3);
    for (const Rect& r1 : grid.regions)
      for (const Rect& r2 : grid.regions) {
        Eigen::VectorXd brute = Eigen::VectorXd::Constant(m.channels(), -1.0);
        for (int y = 0; y < m.height(); ++y)
          for (int x = 0; x < m.width(); ++x)
            if (r1.contains(x, y) || r2.contains(x, y))
              for (Index k = 0; k < m.channels(); ++k) brute[k] = std::max<double>(brute[k], m(x, y, k));
        c.expect(brute == mac(m, r1).cwiseMax(mac(m, r2)), "MAC union " + to_string(r1) + " " + to_string(r2));
      }
  }

  // whitening variance on 10^4 samples
  {
    std::normal_distribution<double> n01;
    const int k = 24;
    // random rotation of axis scales spanning 0.1 .. 10
    Eigen::MatrixXd g(k, k);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = n01(rng);
    const Eigen::MatrixXd rot = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    const Eigen::VectorXd scale = Eigen::VectorXd::LinSpaced(k, -1.0, 1.0).unaryExpr([](double e) {
      return std::pow(10.0, e);
    });
    Eigen::MatrixXd samples(10000, k);
    for (Index i = 0; i < samples.size(); ++i) samples.data()[i] = n01(rng);
    samples = ((samples * scale.asDiagonal()) * rot.transpose()).eval();
    samples.rowwise() += Eigen::RowVectorXd::LinSpaced(k, -3.0, 3.0);
    for (const Index out_dim : {Index(k), Index(10)}) {
      const PcaModel model = fit_pca(samples, out_dim);
      Eigen::MatrixXd white(samples.rows(), out_dim);
      for (Index i = 0; i < samples.rows(); ++i) white.row(i) = whiten(samples.row(i).transpose(), model).transpose();
      const Eigen::RowVectorXd mean = white.colwise().mean();
      const Eigen::RowVectorXd var =
          (white.rowwise() - mean).array().square().colwise().sum() / double(samples.rows() - 1);
      c.expect(var.minCoeff() >= 0.99 && var.maxCoeff() <= 1.01,
               "whitened variance in [" + fmt(var.minCoeff()) + ", " + fmt(var.maxCoeff()) + "]");
    }
  }

  // multiscale order invariance
  {
    const NetworkSpec net = toy_network(1);
    const PcaModel p32 = random_pca(rng, 32, 32);
    for (int t = 0; t < 3; ++t) {
      const Image img = random_image(rng, 90, 60);
      std::vector<int> scales{48, 64, 80, 96};
      EncoderConfig cfg{scales, {3, true}};
      const Descriptor ref = encode_multiscale(img, net, p32, cfg);
      double worst = 0.0;
      do {
        cfg.scales = scales;
        worst = std::max(worst, (encode_multiscale(img, net, p32, cfg) - ref).cwiseAbs().maxCoeff());
      } while (std::next_permutation(scales.begin(), scales.end()));
      c.expect(worst <= 1e-9, "scale-order deviation " + fmt(worst));
    }
  }
  return c.outcome("unit-or-zero norms (1000 maps), MAC union/max, whitened variance, scale-order invariance");
}

Outcome degenerate_equivalences() {
  Checks c;
  std::mt19937_64 rng(51);
  const NetworkSpec net = toy_network(2);
  const PcaModel pca = random_pca(rng, 32, 32);
  PipelineConfig cfg;
  cfg.encoder.scales = {64, 96, 120};

  for (int t = 0; t < 4; ++t) {
    const Image img = random_image(rng, 120, 84);
    const Rect full = img.bounds();
    for (const bool weighted : {false, true}) {
      cfg.encoder.options.weighted = weighted;
      for (const std::string tap : {"low", "mid", "final"}) {
        cfg.attention_tap = tap;
        for (const int s : cfg.encoder.scales) {
          const auto [w, h] = scaled_size(img.width(), img.height(), s);
          const Image scaled = resize_bilinear(img, w, h);
          const Descriptor sa =
              encode_query_scale(scaled, scaled.bounds(), QueryModel::SpatialAttention, net, pca, cfg);
          const Descriptor fq = encode_query_scale(scaled, scaled.bounds(), QueryModel::FullQuery, net, pca, cfg);
          const double dev = (sa - fq).cwiseAbs().maxCoeff();
          c.expect(dev <= 1e-9, "SA vs FQ at tap " + tap + " scale " + std::to_string(s) + ": " + fmt(dev));
        }
      }
      const Descriptor rq = encode_query(img, {full, QueryModel::CroppedRoi}, net, pca, cfg);
      const Descriptor fq = encode_query(img, {full, QueryModel::FullQuery}, net, pca, cfg);
      c.expect(rq == fq, "RQ(full) != FQ, max dev " + fmt((rq - fq).cwiseAbs().maxCoeff()));
    }

    PipelineConfig strict = cfg;
    strict.encoder.options.weighted = true;
    strict.tau = 1.0;
    const Descriptor db_sa = encode_database_sa(img, net, pca, strict);
    const Descriptor plain = encode_database_plain(img, net, pca, strict);
    c.expect(db_sa == plain, "database SA at tau=1 != plain WR-MAC");
  }
  return c.outcome("SA(full ROI) == FQ per scale <= 1e-9; RQ(full) == FQ; database SA tau=1 == WR-MAC exactly");
}

double oracle_ap(const std::vector<std::string>& ranking, const Relevance& rel) {
  // precision at each positive, counting only non-junk items at or above it
  double sum = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (!rel.positive.count(ranking[i])) continue;
    int rank = 0, hits = 0;
    for (std::size_t j = 0; j <= i; ++j) {
      if (rel.junk.count(ranking[j])) continue;
      ++rank;
      if (rel.positive.count(ranking[j])) ++hits;
    }
    sum += static_cast<double>(hits) / rank;
  }
  return rel.positive.empty() ? 0.0 : sum / static_cast<double>(rel.positive.size());
}

Outcome evaluation_oracle() {
  Checks c;
  {
    const std::vector<std::string> r{"a", "b", "c"};
    const double v = average_precision(r, {{"a", "c"}, {}});
    c.expect(std::abs(v - 5.0 / 6.0) <= 1e-12, "ranks 1,3 -> " + fmt(v));
    const double j = average_precision(r, {{"a", "c"}, {"b"}});
    c.expect(j == 1.0, "ranks 1,3 with junk at 2 -> " + fmt(j));
  }

  std::mt19937_64 rng(61);
  std::map<std::string, std::vector<std::string>> rankings;
  std::map<std::string, Relevance> relevance;
  double oracle_sum = 0.0;
  for (int q = 0; q < 100; ++q) {
    std::uniform_int_distribution<int> size(1, 60);
    const int n = size(rng);
    std::vector<std::string> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = "i" + std::to_string(i);
    std::shuffle(ids.begin(), ids.end(), rng);
    Relevance rel;
    std::uniform_real_distribution<double> u;
    const double p_pos = u(rng) * 0.5, p_junk = u(rng) * 0.3;
    for (const auto& id : ids) {
      const double r = u(rng);
      if (r < p_pos) rel.positive.insert(id);
      else if (r < p_pos + p_junk) rel.junk.insert(id);
    }
    if (rel.positive.empty()) {
      rel.junk.erase(ids.front());
      rel.positive.insert(ids.front());
    }
    if (q % 7 == 0) rel.positive.insert("absent");  // a positive the ranking never returns
    const double got = average_precision(ids, rel);
    const double want = oracle_ap(ids, rel);
    c.expect(std::abs(got - want) <= 1e-12, "AP " + fmt(got) + " vs oracle " + fmt(want));
    const std::string qid = "q" + std::to_string(q);
    rankings[qid] = ids;
    relevance[qid] = rel;
    oracle_sum += want;
  }
  const double map = mean_average_precision(rankings, relevance);
  c.expect(std::abs(map - oracle_sum / 100.0) <= 1e-12, "mAP " + fmt(map) + " vs " + fmt(oracle_sum / 100.0));
  return c.outcome("AP and mAP equal the double-loop oracle within 1e-12 on 100 random rankings");
}

Outcome directional() {
  SyntheticConfig sc;  // 192x144, 10 queries, facilitatory context
  const SyntheticDataset ds = generate_synthetic(20261018, 200, sc);
  ImageSet images;
  for (std::size_t i = 0; i < ds.images.size(); ++i) images.emplace(ds.manifest.images[i].id, ds.images[i]);

  const NetworkSpec net = toy_network(0);
  PipelineConfig cfg;
  cfg.encoder.scales = {96, 128, 160};
  const PcaModel pca = fit_pca(harvest_region_vectors(ds.manifest, images, net, cfg.encoder), 32, "synthetic");
  const EvalReport report = run_eval(ds.manifest, images, net, pca, cfg, EvalOptions{});

  std::istringstream table(report.to_text());
  for (std::string line; std::getline(table, line);) std::printf("      | %s\n", line.c_str());

  const auto m = [&](QueryModel q, bool w) { return report.find(q, w)->map; };
  Checks c;
  c.expect(report.cells.size() == 8, "expected 8 cells");
  for (const bool w : {false, true})
    c.expect(m(QueryModel::SpatialAttention, w) >= m(QueryModel::CroppedRoi, w),
             std::string("SA < RQ in the ") + (w ? "WRMAC" : "R-MAC") + " column");
  c.expect(m(QueryModel::SpatialAttention, true) >= m(QueryModel::SpatialAttention, false),
           "SA row: WRMAC < R-MAC");
  return c.outcome("200 images, 10 queries: mAP(SA) >= mAP(RQ) per column, SA row WRMAC >= R-MAC");
}

}  // namespace

int main() {
  report("attention algebra", 1, attention_algebra);
  report("wrmac == rmac (uniform)", 10, wrmac_uniform);
  report("receptive-field oracle", 60, receptive_fields);
  report("encoder contracts", 60, encoder_contracts);
  report("degenerate equivalences", 60, degenerate_equivalences);
  report("evaluation oracle", 10, evaluation_oracle);
  report("directional 4x2 grid", 300, directional);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
