#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxr/image.hpp"
#include "ctxr/tensor.hpp"

namespace ctxr {

/// Ground truth of one query. Ids in neither set are negatives.
struct Relevance {
  std::set<std::string> positive;
  std::set<std::string> junk;
};

/// Average of precision at the rank of each positive, after removing junk ids from the ranking.
/// Positives missing from the ranking contribute zero. No positives gives 0 and logs a warning.
/// Throws std::invalid_argument on duplicate ids.
double average_precision(std::span<const std::string> ranking, const Relevance& relevance);

/// Arithmetic mean of per-query AP, in ascending query-id order.
/// Throws std::invalid_argument when a query in `relevance` has no ranking.
double mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings,
                              const std::map<std::string, Relevance>& relevance);

struct ImageEntry {
  std::string id;
  std::string path;  // relative to the manifest directory
  int width = 0;
  int height = 0;
};

struct QueryEntry {
  std::string id;
  std::string image;
  Rect roi;
  std::vector<std::string> positive;
  std::vector<std::string> junk;
};

struct DatasetManifest {
  std::vector<ImageEntry> images;
  std::vector<QueryEntry> queries;

  /// Throws std::invalid_argument on unknown ids, duplicate ids, overlapping labels or
  /// out-of-image ROIs.
  void validate() const;

  const ImageEntry& image(const std::string& id) const;

  /// Relevance of a query; with `self_as_junk` the query's own image moves to the junk set.
  Relevance relevance(const QueryEntry& query, bool self_as_junk = true) const;
};

// Manifest JSON:
//   {"images": [{"id", "path", "w", "h"}],
//    "queries": [{"id", "image", "roi": [x0, y0, x1, y1], "positive": [...], "junk": [...]}]}
DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads every manifest image (paths resolved against `root`), keyed by id.
std::map<std::string, Image> load_images(const DatasetManifest& manifest, const std::filesystem::path& root);

struct SyntheticConfig {
  int width = 192;
  int height = 144;
  int n_queries = 10;
  /// Companion pattern next to every landmark; look-alike distractors carry a different one.
  bool facilitatory_context = true;
};

/// Ground truth of one generated image, useful for debugging and tests.
struct SyntheticImageInfo {
  enum class Role { Positive, LookAlike, Filler };
  Role role = Role::Filler;
  int landmark_class = -1;  // class whose landmark appearance is drawn, -1 for fillers
  Rect landmark;
  Rect companion;  // empty when none was drawn
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<Image> images;  // parallel to manifest.images
  std::vector<SyntheticImageInfo> info;
};

/// Landmark classes, one query each. Per class some images show the landmark with its companion
/// (positives), others the identical landmark with a foreign companion (look-alikes, negatives).
/// The rest are fillers with unrelated shapes. Fully determined by (seed, n_images, config).
SyntheticDataset generate_synthetic(std::uint64_t seed, int n_images, const SyntheticConfig& config = {});

/// Writes images/<id>.ppm and manifest.json under `dir`.
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace ctxr
