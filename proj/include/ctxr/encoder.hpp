#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctxr/convnet.hpp"
#include "ctxr/image.hpp"
#include "ctxr/saliency.hpp"
#include "ctxr/tensor.hpp"

namespace ctxr {

/// Fixed multi-scale R-MAC region layout over a W x H activation grid.
struct RegionGrid {
  std::vector<Rect> regions;
  int n_scales = 0;
};

/// Scale 1 is the full grid. Scale s >= 2 places squares of side ceil(2 min(W,H) / (s+1)),
/// per axis the fewest evenly spaced positions that span the axis with >= 40% overlap
/// between neighbours. Duplicate rectangles are dropped.
RegionGrid rmac_grid(int width, int height, int n_scales);

/// Per-channel spatial maximum over the region.
Eigen::VectorXd mac(const FeatureMap& map, const Rect& region);

/// Classical PCA whitening: y = diag(1/sqrt(max(eigenvalue, floor))) * basis * (x - mean).
struct PcaModel {
  Eigen::VectorXd mean;         // K
  Eigen::MatrixXd basis;        // K' x K, orthonormal rows, leading components first
  Eigen::VectorXd eigenvalues;  // K', descending
  std::uint64_t corpus_digest = 0;
  std::string corpus;           // free-form description of the fitting data

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return basis.rows(); }

  /// Zero mean, identity basis, unit eigenvalues.
  static PcaModel identity(Index dim);
};

inline constexpr double kEigenvalueFloor = 1e-8;

/// Thrown when the samples cannot support the requested output dimension.
class RankError : public std::runtime_error {
 public:
  RankError(Index achievable, Index requested);
  Index achievable_rank;
};

/// Fits on the rows of `samples`. Needs more rows than `out_dim` and rank >= out_dim.
PcaModel fit_pca(const Eigen::MatrixXd& samples, Index out_dim, std::string corpus = {});

Eigen::VectorXd whiten(const Eigen::VectorXd& v, const PcaModel& model);

/// Weighted sum of region vectors followed by l2 normalization.
Descriptor aggregate(std::span<const Eigen::VectorXd> region_vectors, std::span<const double> weights);

struct EncodeOptions {
  int grid_scales = 3;
  bool weighted = false;  // saliency-weighted aggregation (WR-MAC)
};

/// l2-normalized MAC vector of every grid region over `area` (grid built on the area's size,
/// offset into the map). Regions without any positive activation give the zero vector.
std::vector<Eigen::VectorXd> region_vectors(const FeatureMap& map, const Rect& area, int grid_scales);

/// R-MAC / WR-MAC of the activations inside `area`.
///
/// Each region vector goes l2 -> whiten -> l2 before weighting; a region whose MAC is all
/// zero contributes nothing. Weights are the regions' peak saliency over `area`.
Descriptor encode_region(const FeatureMap& map, const Rect& area, const PcaModel& pca,
                         const EncodeOptions& options);

/// encode_region over the whole map.
Descriptor encode(const FeatureMap& map, const PcaModel& pca, const EncodeOptions& options);

/// Runs `per_scale` on the image resized to each long side in `scales`, sums the results and
/// l2-normalizes. The callback receives the resized image.
Descriptor encode_multiscale(const Image& image, std::span<const int> scales, int min_side,
                             const std::function<Descriptor(const Image&)>& per_scale);

struct EncoderConfig {
  std::vector<int> scales{550, 800, 1050};
  EncodeOptions options{3, true};
};

/// Whole-image descriptor: every scale forwarded to the "final" tap and encoded.
Descriptor encode_multiscale(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                             const EncoderConfig& config);

// PCAW format (little-endian):
//   "PCAW" | u32 version=1 | u32 K | u32 K' | f32 mean[K] | f32 basis[K' x K] row-major |
//   f32 eigenvalues[K'] | u64 corpus digest | u32 len | corpus description (utf-8)
inline constexpr std::uint32_t kPcaVersion = 1;

void write_pca(const PcaModel& model, std::ostream& out);
PcaModel read_pca(std::istream& in);
void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace ctxr
