#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "ctxr/attention.hpp"
#include "ctxr/convnet.hpp"
#include "ctxr/encoder.hpp"
#include "ctxr/image.hpp"

namespace ctxr {

/// How the query image and its ROI are turned into a descriptor.
enum class QueryModel {
  FullQuery,         // FQ: whole image
  CroppedRoi,        // RQ: pixels cropped to the ROI
  CroppedActivation, // AQ: whole image forwarded, activations restricted to the projected ROI
  SpatialAttention,  // SA: whole image, activations outside the ROI attenuated at a tap
};

const char* to_string(QueryModel model);
QueryModel parse_query_model(const std::string& name);

struct PipelineConfig {
  EncoderConfig encoder;
  AttentionParams attention;
  std::string attention_tap = "mid";
  double tau = 0.7;   // database-side saliency threshold
  long min_area = 1;  // database-side minimum component size, in attention-tap cells
};

struct QuerySpec {
  Rect roi;  // pixels of the original image
  QueryModel model = QueryModel::SpatialAttention;
};

Descriptor encode_query(const Image& image, const QuerySpec& query, const NetworkSpec& net,
                        const PcaModel& pca, const PipelineConfig& config);

/// Single-scale helpers; `roi` is in the pixel coordinates of `image`.
Descriptor encode_query_scale(const Image& image, const Rect& roi, QueryModel model,
                              const NetworkSpec& net, const PcaModel& pca, const PipelineConfig& config);

/// Attention applied at the configured tap for a projected ROI, then forwarded to "final".
FeatureMap attend(const FeatureMap& tap_map, int tap_layer, const Rect& roi_projection,
                  const NetworkSpec& net, const AttentionParams& params);

/// Multiscale R-MAC / WR-MAC of a database image (aggregation per config.encoder.options).
Descriptor encode_database_plain(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                                 const PipelineConfig& config);

/// Database-side attention at one scale. Returns the first-pass descriptor untouched when no
/// saliency component survives the threshold.
Descriptor encode_database_sa_scale(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                                    const PipelineConfig& config, int* roi_count = nullptr);

/// Multiscale database-side attention.
Descriptor encode_database_sa(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                              const PipelineConfig& config);

struct SearchHit {
  std::string id;
  double similarity = 0.0;
};

/// Exhaustive dot-product index of unit-norm descriptors.
class DescriptorIndex {
 public:
  struct Entry {
    std::string id;
    Descriptor descriptor;
  };

  DescriptorIndex() = default;
  explicit DescriptorIndex(Index dim) : dim_(dim) {}

  /// Throws on a duplicate id or a dimension mismatch.
  void add(std::string id, Descriptor descriptor);

  Index dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  Index dim_ = 0;
  std::vector<Entry> entries_;
  std::unordered_set<std::string> ids_;
};

/// Top-k by descending dot product; ties by ascending id.
std::vector<SearchHit> search(const DescriptorIndex& index, const Descriptor& query, std::size_t k);

// DIDX format (little-endian):
//   "DIDX" | u32 version=1 | u32 count | u32 K' | count x (u32 id length | utf-8 id | K' f32)
inline constexpr std::uint32_t kIndexVersion = 1;

void write_index(const DescriptorIndex& index, std::ostream& out);
DescriptorIndex read_index(std::istream& in);
void save_index(const DescriptorIndex& index, const std::filesystem::path& path);
DescriptorIndex load_index(const std::filesystem::path& path);

}  // namespace ctxr
