#include "ctxr/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "ctxr/binary_io.hpp"

namespace ctxr {

namespace {

// Evenly spaced start offsets of `count` windows of `side` spanning [0, length).
std::vector<int> window_starts(int length, int side) {
  if (side >= length) return {0};
  // fewest windows with step (length - side) / (count - 1) <= 0.6 * side
  const long gaps = (5L * (length - side) + 3L * side - 1) / (3L * side);
  std::vector<int> starts;
  for (long j = 0; j <= gaps; ++j)
    starts.push_back(static_cast<int>((2 * j * (length - side) + gaps) / (2 * gaps)));
  return starts;
}

}  // namespace

RegionGrid rmac_grid(int width, int height, int n_scales) {
  if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be >= 1");
  if (n_scales < 1) throw std::invalid_argument("n_scales must be >= 1");

  RegionGrid grid;
  grid.n_scales = n_scales;
  grid.regions.push_back({0, 0, width, height});
  const int short_side = std::min(width, height);
  for (int s = 2; s <= n_scales; ++s) {
    const int side = std::max(1, (2 * short_side + s) / (s + 1));
    for (int y : window_starts(height, side)) {
      for (int x : window_starts(width, side)) {
        const Rect r{x, y, std::min(x + side, width), std::min(y + side, height)};
        if (std::find(grid.regions.begin(), grid.regions.end(), r) == grid.regions.end())
          grid.regions.push_back(r);
      }
    }
  }
  return grid;
}

Eigen::VectorXd mac(const FeatureMap& map, const Rect& region) {
  if (!region.inside(static_cast<int>(map.width()), static_cast<int>(map.height())))
    throw std::out_of_range("region " + to_string(region) + " outside feature map");
  Eigen::VectorXd out(map.channels());
  for (Index k = 0; k < map.channels(); ++k)
    out[k] = map.channel(k).block(region.y0, region.x0, region.height(), region.width()).maxCoeff();
  return out;
}

PcaModel PcaModel::identity(Index dim) {
  PcaModel m;
  m.mean = Eigen::VectorXd::Zero(dim);
  m.basis = Eigen::MatrixXd::Identity(dim, dim);
  m.eigenvalues = Eigen::VectorXd::Ones(dim);
  m.corpus = "identity";
  return m;
}

RankError::RankError(Index achievable, Index requested)
    : std::runtime_error("PCA samples have rank " + std::to_string(achievable) +
                         ", below the requested output dimension " + std::to_string(requested)),
      achievable_rank(achievable) {}

PcaModel fit_pca(const Eigen::MatrixXd& samples, Index out_dim, std::string corpus) {
  const Index n = samples.rows();
  const Index dim = samples.cols();
  if (out_dim < 1) throw std::invalid_argument("PCA output dimension must be >= 1");
  if (out_dim > dim)
    throw std::invalid_argument("PCA output dimension " + std::to_string(out_dim) +
                                " exceeds input dimension " + std::to_string(dim));
  if (n <= out_dim)
    throw std::invalid_argument("PCA needs more than " + std::to_string(out_dim) + " samples, got " +
                                std::to_string(n));
  if (!samples.allFinite()) throw std::invalid_argument("PCA samples contain non-finite values");

  PcaModel model;
  model.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.adjoint() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  // ascending order; flip to descending
  const Eigen::VectorXd evals = solver.eigenvalues().reverse();
  const Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  const double top = std::max(evals[0], 0.0);
  const double tol = std::max(top * 1e-10, std::numeric_limits<double>::min());
  const Index rank = (evals.array() > tol).count();
  if (rank < out_dim) throw RankError(rank, out_dim);

  model.basis = evecs.leftCols(out_dim).transpose();
  model.eigenvalues = evals.head(out_dim);
  // sign convention: the largest-magnitude entry of each basis row is positive
  for (Index i = 0; i < out_dim; ++i) {
    Index arg = 0;
    model.basis.row(i).cwiseAbs().maxCoeff(&arg);
    if (model.basis(i, arg) < 0) model.basis.row(i) *= -1.0;
  }

  std::uint64_t digest = binary::fnv1a({});
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < dim; ++c) {
      const double v = samples(r, c);
      digest = binary::fnv1a({reinterpret_cast<const char*>(&v), sizeof v}, digest);
    }
  }
  model.corpus_digest = digest;
  model.corpus = std::move(corpus);
  return model;
}

Eigen::VectorXd whiten(const Eigen::VectorXd& v, const PcaModel& model) {
  if (v.size() != model.input_dim())
    throw std::invalid_argument("whiten: vector length " + std::to_string(v.size()) +
                                " != model input dimension " + std::to_string(model.input_dim()));
  return (model.basis * (v - model.mean)).cwiseQuotient(
      model.eigenvalues.array().max(kEigenvalueFloor).sqrt().matrix());
}

Descriptor aggregate(std::span<const Eigen::VectorXd> region_vectors, std::span<const double> weights) {
  if (region_vectors.size() != weights.size())
    throw std::invalid_argument("aggregate: region and weight counts differ");
  if (region_vectors.empty()) throw std::invalid_argument("aggregate: no regions");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(region_vectors.front().size());
  for (std::size_t i = 0; i < region_vectors.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("aggregate: negative region weight");
    if (region_vectors[i].size() != sum.size())
      throw std::invalid_argument("aggregate: region vectors differ in length");
    sum += weights[i] * region_vectors[i];
  }
  return l2_normalize(sum);
}

std::vector<Eigen::VectorXd> region_vectors(const FeatureMap& map, const Rect& area, int grid_scales) {
  if (!area.inside(static_cast<int>(map.width()), static_cast<int>(map.height())))
    throw std::out_of_range("encoding area " + to_string(area) + " outside feature map");
  const RegionGrid grid = rmac_grid(area.width(), area.height(), grid_scales);
  std::vector<Eigen::VectorXd> out;
  out.reserve(grid.regions.size());
  for (const Rect& r : grid.regions) out.push_back(l2_normalize(mac(map, r.translated(area.x0, area.y0))));
  return out;
}

Descriptor encode_region(const FeatureMap& map, const Rect& area, const PcaModel& pca,
                         const EncodeOptions& options) {
  if (!map.rectified()) throw std::invalid_argument("encode needs a rectified feature map");
  if (map.channels() != pca.input_dim())
    throw std::invalid_argument("feature map has " + std::to_string(map.channels()) +
                                " channels, PCA expects " + std::to_string(pca.input_dim()));

  const RegionGrid grid = rmac_grid(area.width(), area.height(), options.grid_scales);
  const auto raw = region_vectors(map, area, options.grid_scales);

  SaliencyMap saliency;
  if (options.weighted) saliency = compute_saliency(map.crop(area));

  std::vector<Eigen::VectorXd> vectors;
  std::vector<double> weights;
  vectors.reserve(raw.size());
  weights.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].isZero(0.0)) continue;
    vectors.push_back(l2_normalize(whiten(raw[i], pca)));
    weights.push_back(options.weighted ? region_weight(saliency, grid.regions[i]) : 1.0);
  }
  if (vectors.empty()) return Descriptor::Zero(pca.output_dim());
  return aggregate(vectors, weights);
}

Descriptor encode(const FeatureMap& map, const PcaModel& pca, const EncodeOptions& options) {
  return encode_region(map, {0, 0, static_cast<int>(map.width()), static_cast<int>(map.height())}, pca,
                       options);
}

Descriptor encode_multiscale(const Image& image, std::span<const int> scales, int min_side,
                             const std::function<Descriptor(const Image&)>& per_scale) {
  if (scales.empty()) throw std::invalid_argument("no encoding scales");
  Descriptor sum;
  for (const int s : scales) {
    const auto [w, h] = scaled_size(image.width(), image.height(), s);
    if (std::min(w, h) < min_side)
      throw std::invalid_argument("scale " + std::to_string(s) + " gives a " + std::to_string(w) + "x" +
                                  std::to_string(h) + " image, below the network minimum " +
                                  std::to_string(min_side));
    Descriptor d = per_scale(resize_bilinear(image, w, h));
    if (scales.size() == 1) return d;
    if (sum.size() == 0) sum = Descriptor::Zero(d.size());
    sum += d;
  }
  return l2_normalize(sum);
}

Descriptor encode_multiscale(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                             const EncoderConfig& config) {
  return encode_multiscale(image, config.scales, min_input_size(net), [&](const Image& scaled) {
    return encode(forward(net, scaled, net.tap("final")), pca, config.options);
  });
}

// ---------------------------------------------------------------------------
// PCAW

void write_pca(const PcaModel& model, std::ostream& out) {
  const Index k = model.input_dim(), kp = model.output_dim();
  if (model.basis.cols() != k || model.eigenvalues.size() != kp)
    throw std::invalid_argument("inconsistent PCA model dimensions");
  binary::put_magic(out, "PCAW");
  binary::put_u32(out, kPcaVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(k));
  binary::put_u32(out, static_cast<std::uint32_t>(kp));
  for (Index i = 0; i < k; ++i) binary::put_f32(out, static_cast<float>(model.mean[i]));
  for (Index r = 0; r < kp; ++r)
    for (Index c = 0; c < k; ++c) binary::put_f32(out, static_cast<float>(model.basis(r, c)));
  for (Index i = 0; i < kp; ++i) binary::put_f32(out, static_cast<float>(model.eigenvalues[i]));
  binary::put_u64(out, model.corpus_digest);
  binary::put_string(out, model.corpus);
  if (!out) throw std::ios_base::failure("PCAW write failed");
}

PcaModel read_pca(std::istream& in) {
  binary::expect_magic(in, "PCAW");
  const auto version = binary::get_u32(in, "PCAW version");
  if (version != kPcaVersion) throw FormatError("unsupported PCAW version " + std::to_string(version));
  const auto k = binary::get_u32(in, "PCAW K");
  const auto kp = binary::get_u32(in, "PCAW K'");
  if (k == 0 || kp == 0 || kp > k || k > (1u << 16)) throw FormatError("invalid PCAW dimensions");
  PcaModel m;
  m.mean.resize(k);
  m.basis.resize(kp, k);
  m.eigenvalues.resize(kp);
  for (Index i = 0; i < k; ++i) m.mean[i] = binary::get_f32(in, "PCAW mean");
  for (Index r = 0; r < kp; ++r)
    for (Index c = 0; c < k; ++c) m.basis(r, c) = binary::get_f32(in, "PCAW basis");
  for (Index i = 0; i < kp; ++i) m.eigenvalues[i] = binary::get_f32(in, "PCAW eigenvalues");
  m.corpus_digest = binary::get_u64(in, "PCAW digest");
  m.corpus = binary::get_string(in, "PCAW corpus");
  if (!m.mean.allFinite() || !m.basis.allFinite() || !m.eigenvalues.allFinite() ||
      (m.eigenvalues.array() <= 0.0).any())
    throw FormatError("PCAW payload holds invalid values");
  return m;
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  write_pca(model, out);
}

PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_pca(in);
}

}  // namespace ctxr
