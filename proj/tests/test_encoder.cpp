#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ctxr/encoder.hpp"

using namespace ctxr;

namespace {

FeatureMap random_rectified(std::mt19937_64& rng, int w, int h, int k, double zeros = 0.3) {
  std::uniform_real_distribution<float> u(0, 1);
  std::bernoulli_distribution z(zeros);
  FeatureMap m(w, h, k);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng) ? 0.0f : u(rng);
  m.set_rectified(true);
  return m;
}

PcaModel fitted(std::mt19937_64& rng, int k, int out) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd mix(k, k), x(800, k);
  for (Index i = 0; i < mix.size(); ++i) mix.data()[i] = n01(rng);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
  x = (x * mix).eval();
  x.array() += 1.0;
  return fit_pca(x, out);
}

// Per axis, the fewest evenly spaced windows whose neighbours overlap by at least 40%.
std::vector<int> brute_positions(int length, int side) {
  if (side >= length) return {0};
  for (int n = 2;; ++n) {
    const double step = double(length - side) / (n - 1);
    if (side - step < 0.4 * side - 1e-12) continue;
    std::vector<int> p;
    for (int j = 0; j < n; ++j) p.push_back(static_cast<int>(std::floor(j * step + 0.5)));
    return p;
  }
}

std::set<std::tuple<int, int, int, int>> brute_grid(int w, int h, int scales) {
  std::set<std::tuple<int, int, int, int>> out{{0, 0, w, h}};
  for (int s = 2; s <= scales; ++s) {
    const int side = static_cast<int>(std::ceil(2.0 * std::min(w, h) / (s + 1)));
    for (int y : brute_positions(h, side))
      for (int x : brute_positions(w, side)) out.insert({x, y, std::min(x + side, w), std::min(y + side, h)});
  }
  return out;
}

}  // namespace

TEST_CASE("rmac_grid examples") {
  const RegionGrid g8 = rmac_grid(8, 8, 3);
  CHECK(g8.regions.size() == 14);
  CHECK(g8.regions.front() == Rect{0, 0, 8, 8});
  CHECK(rmac_grid(1, 1, 3).regions.size() == 1);
  const RegionGrid g21 = rmac_grid(2, 1, 1);
  REQUIRE(g21.regions.size() == 1);
  CHECK(g21.regions[0] == Rect{0, 0, 2, 1});
  CHECK_THROWS(rmac_grid(0, 3, 1));
  CHECK_THROWS(rmac_grid(3, 3, 0));
}

TEST_CASE("rmac_grid matches the brute-force placer") {
  for (int w = 1; w <= 40; ++w)
    for (int h = 1; h <= 40; ++h)
      for (int s = 1; s <= 4; ++s) {
        const RegionGrid g = rmac_grid(w, h, s);
        std::set<std::tuple<int, int, int, int>> got;
        for (const Rect& r : g.regions) {
          CHECK(r.inside(w, h));
          got.insert({r.x0, r.y0, r.x1, r.y1});
        }
        CHECK(got.size() == g.regions.size());
        CHECK(got == brute_grid(w, h, s));
      }
}

TEST_CASE("mac examples") {
  FeatureMap m(2, 2, 2);
  m(0, 0, 0) = 1, m(1, 0, 0) = 2, m(0, 1, 0) = 3, m(1, 1, 0) = 4;
  m(0, 0, 1) = 0, m(1, 0, 1) = 5, m(0, 1, 1) = 1, m(1, 1, 1) = 0;
  CHECK(mac(m, {0, 0, 2, 2}) == Eigen::Vector2d(4, 5));
  CHECK(mac(m, {0, 0, 1, 2}) == Eigen::Vector2d(3, 1));
  CHECK(mac(m, {0, 0, 2, 2}) == mac(m, {0, 0, 1, 2}).cwiseMax(mac(m, {1, 0, 2, 2})));
  CHECK_THROWS(mac(m, {1, 1, 3, 2}));
}

TEST_CASE("fit_pca whitens to identity covariance") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x(10000, 2);
  for (Index i = 0; i < x.rows(); ++i) x.row(i) << 2.0 * n01(rng) + 5.0, n01(rng) - 1.0;
  const PcaModel model = fit_pca(x, 2);
  CHECK(model.eigenvalues[0] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(model.eigenvalues[1] == doctest::Approx(1.0).epsilon(0.05));
  Eigen::MatrixXd w(x.rows(), 2);
  for (Index i = 0; i < x.rows(); ++i) w.row(i) = whiten(x.row(i).transpose(), model).transpose();
  const Eigen::MatrixXd centred = w.rowwise() - w.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / double(x.rows() - 1);
  CHECK((cov - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-3);

  Eigen::MatrixXd iso(10000, 5);
  for (Index i = 0; i < iso.size(); ++i) iso.data()[i] = n01(rng);
  const PcaModel im = fit_pca(iso, 5);
  CHECK((im.basis * im.basis.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((im.eigenvalues.array() - 1.0).abs().maxCoeff() <= 0.1);
  for (Index i = 1; i < 5; ++i) CHECK(im.eigenvalues[i] <= im.eigenvalues[i - 1]);
}

TEST_CASE("fit_pca errors") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(50, 4, 2.5);
  CHECK_THROWS_AS(fit_pca(constant, 2), RankError);
  Eigen::MatrixXd few = Eigen::MatrixXd::Random(3, 4);
  CHECK_THROWS(fit_pca(few, 3));
  CHECK_THROWS(fit_pca(Eigen::MatrixXd::Random(50, 4), 5));
  CHECK_THROWS(fit_pca(Eigen::MatrixXd::Random(50, 4), 0));

  // rank 2 data in 4 dimensions: asking for 3 reports the achievable rank
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd lo(200, 2), up(2, 4);
  for (Index i = 0; i < lo.size(); ++i) lo.data()[i] = n01(rng);
  for (Index i = 0; i < up.size(); ++i) up.data()[i] = n01(rng);
  try {
    fit_pca(lo * up, 3);
    FAIL("expected a rank error");
  } catch (const RankError& e) {
    CHECK(e.achievable_rank == 2);
  }
  CHECK_NOTHROW(fit_pca(lo * up, 2));
}

TEST_CASE("whiten") {
  const PcaModel id = PcaModel::identity(4);
  const Eigen::Vector4d v(1, -2, 3, 0.5);
  CHECK(whiten(v, id) == Eigen::VectorXd(v));

  std::mt19937_64 rng(3);
  const PcaModel m = fitted(rng, 6, 4);
  CHECK(whiten(m.mean, m).isZero(0.0));
  const Eigen::VectorXd a = Eigen::VectorXd::Random(6), b = Eigen::VectorXd::Random(6);
  CHECK((whiten(a, m) + whiten(b, m) - whiten(a + b - m.mean, m)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(whiten(a, m).size() == 4);
  CHECK_THROWS(whiten(Eigen::VectorXd::Zero(5), m));
}

TEST_CASE("aggregate") {
  const std::vector<Eigen::VectorXd> e{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
  const std::vector<double> ones{1, 1}, zeros{0, 0}, sevens{7, 7};
  const Descriptor d = aggregate(e, ones);
  CHECK(d[0] == doctest::Approx(0.70710678));
  CHECK(d[1] == doctest::Approx(0.70710678));
  CHECK(d[2] == 0.0);
  CHECK(aggregate(e, zeros).isZero(0.0));
  CHECK((aggregate(e, sevens) - d).cwiseAbs().maxCoeff() <= 1e-15);
  const std::vector<double> negative{1, -1}, short_list{1};
  CHECK_THROWS(aggregate(e, negative));
  CHECK_THROWS(aggregate(e, short_list));
}

TEST_CASE("raising one weight raises the descriptor's projection on that region") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    std::vector<Eigen::VectorXd> v(4, Eigen::VectorXd(6));
    for (auto& x : v) {
      for (auto& c : x) c = n01(rng);
      x = l2_normalize(x);
    }
    std::vector<double> w{0.3, 0.6, 0.2, 0.9};
    const std::size_t i = static_cast<std::size_t>(t % 4);
    const double before = aggregate(v, w).dot(v[i]);
    w[i] += 0.25;
    CHECK(aggregate(v, w).dot(v[i]) > before);
  }
}

TEST_CASE("encode contracts") {
  std::mt19937_64 rng(5);
  const PcaModel pca = fitted(rng, 8, 8);

  // constant saliency: weighted == plain
  FeatureMap flat(6, 5, 8);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      flat(x, y, (x + y) % 8) = 2.0f;
      flat(x, y, (3 * x + y + 1) % 8) = 1.0f;
    }
  flat.set_rectified(true);
  CHECK((encode(flat, pca, {3, true}) - encode(flat, pca, {3, false})).cwiseAbs().maxCoeff() <= 1e-12);

  FeatureMap zero(5, 4, 8);
  zero.set_rectified(true);
  CHECK(encode(zero, pca, {3, true}).isZero(0.0));
  CHECK(encode(zero, pca, {3, false}).isZero(0.0));

  const FeatureMap single = random_rectified(rng, 1, 1, 8, 0.0);
  const Descriptor expected = l2_normalize(whiten(l2_normalize(mac(single, {0, 0, 1, 1})), pca));
  CHECK((encode(single, pca, {3, true}) - expected).cwiseAbs().maxCoeff() <= 1e-15);

  for (int t = 0; t < 300; ++t) {
    std::uniform_int_distribution<int> d(1, 12);
    const FeatureMap m = random_rectified(rng, d(rng), d(rng), 8, t % 5 == 0 ? 0.97 : 0.3);
    for (bool w : {false, true}) {
      const double n = encode(m, pca, {3, w}).norm();
      CHECK((n == 0.0 || std::abs(n - 1.0) <= 1e-6));
    }
  }

  FeatureMap raw = random_rectified(rng, 4, 4, 8);
  raw.set_rectified(false);
  CHECK_THROWS(encode(raw, pca, {3, false}));
  CHECK_THROWS(encode(random_rectified(rng, 4, 4, 7), pca, {3, false}));
}

TEST_CASE("weighted differs from plain when saliency varies across regions") {
  std::mt19937_64 rng(6);
  const PcaModel pca = fitted(rng, 8, 8);
  FeatureMap m = random_rectified(rng, 10, 10, 8, 0.0);
  // a bright corner whose energy sits in two channels only
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      for (int k = 0; k < 8; ++k) m(x, y, k) = 0.0f;
      m(x, y, 0) = 20.0f;
      m(x, y, 1) = 15.0f;
    }
  CHECK((encode(m, pca, {3, true}) - encode(m, pca, {3, false})).norm() > 1e-3);
}

TEST_CASE("encode_region restricts to the area") {
  std::mt19937_64 rng(7);
  const PcaModel pca = fitted(rng, 8, 8);
  const FeatureMap m = random_rectified(rng, 12, 9, 8);
  const Rect area{3, 2, 10, 7};
  for (bool w : {false, true}) {
    // weights are peak saliency of each region relative to the area's own peak, so the
    // cropped map gives the same ratios
    const Descriptor inside = encode_region(m, area, pca, {3, w});
    const Descriptor cropped = encode(m.crop(area), pca, {3, w});
    CHECK((inside - cropped).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK((encode_region(m, {0, 0, 12, 9}, pca, {3, true}) - encode(m, pca, {3, true})).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_multiscale") {
  Image big(1000, 750);
  std::vector<std::pair<int, int>> seen;
  const std::vector<int> defaults{550, 800, 1050};
  encode_multiscale(big, defaults, 1, [&](const Image& s) {
    seen.push_back({s.width(), s.height()});
    return Descriptor(Descriptor::Unit(2, 0));
  });
  CHECK(seen == std::vector<std::pair<int, int>>{{550, 413}, {800, 600}, {1050, 788}});

  std::mt19937_64 rng(8);
  const NetworkSpec net = toy_network(0);
  const PcaModel pca = fitted(rng, 32, 32);
  Image img(70, 50);
  std::uniform_real_distribution<float> u(0, 1);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 50; ++y)
      for (int x = 0; x < 70; ++x) img(x, y, c) = u(rng);

  EncoderConfig one{{60}, {3, true}};
  const auto [w, h] = scaled_size(70, 50, 60);
  const Descriptor direct = encode(forward(net, resize_bilinear(img, w, h), 8), pca, one.options);
  CHECK(encode_multiscale(img, net, pca, one) == direct);

  EncoderConfig a{{40, 56, 70}, {3, false}}, b{{70, 40, 56}, {3, false}};
  CHECK((encode_multiscale(img, net, pca, a) - encode_multiscale(img, net, pca, b)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(encode_multiscale(img, net, pca, a).norm() - 1.0) <= 1e-9);

  EncoderConfig tiny{{3}, {3, false}};
  CHECK_THROWS(encode_multiscale(img, net, pca, tiny));
  const std::vector<int> none;
  CHECK_THROWS(encode_multiscale(img, none, 1, [](const Image&) { return Descriptor(); }));
}

TEST_CASE("PCAW round-trip and corruption") {
  std::mt19937_64 rng(9);
  PcaModel m = fitted(rng, 6, 3);
  m.corpus = "unit test corpus";
  m.corpus_digest = 0x1234abcdULL;
  std::stringstream buf;
  write_pca(m, buf);
  const std::string bytes = buf.str();
  CHECK(bytes.size() == 4 + 12 + 4 * (6 + 18 + 3) + 8 + 4 + m.corpus.size());
  const PcaModel back = read_pca(buf);
  CHECK(back.mean == m.mean.cast<float>().cast<double>());
  CHECK(back.basis == m.basis.cast<float>().cast<double>());
  CHECK(back.eigenvalues == m.eigenvalues.cast<float>().cast<double>());
  CHECK(back.corpus == m.corpus);
  CHECK(back.corpus_digest == m.corpus_digest);

  std::string bad = bytes;
  bad[1] = 'X';
  std::istringstream b1(bad);
  CHECK_THROWS_AS(read_pca(b1), FormatError);
  std::istringstream b2(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_pca(b2), FormatError);
}
