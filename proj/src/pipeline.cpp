#include "ctxr/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "ctxr/binary_io.hpp"

namespace ctxr {

const char* to_string(QueryModel model) {
  switch (model) {
    case QueryModel::FullQuery: return "fq";
    case QueryModel::CroppedRoi: return "rq";
    case QueryModel::CroppedActivation: return "aq";
    case QueryModel::SpatialAttention: return "sa";
  }
  return "?";
}

QueryModel parse_query_model(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "fq") return QueryModel::FullQuery;
  if (lower == "rq") return QueryModel::CroppedRoi;
  if (lower == "aq") return QueryModel::CroppedActivation;
  if (lower == "sa") return QueryModel::SpatialAttention;
  throw std::invalid_argument("unknown query model \"" + name + "\" (expected fq, rq, aq or sa)");
}

FeatureMap attend(const FeatureMap& tap_map, int tap_layer, const Rect& roi_projection,
                  const NetworkSpec& net, const AttentionParams& params) {
  const AttentionMask mask = build_mask(compute_saliency(tap_map), roi_projection, params);
  return forward(net, modulate(tap_map, mask), tap_layer + 1, net.tap("final"));
}

Descriptor encode_query_scale(const Image& image, const Rect& roi, QueryModel model,
                              const NetworkSpec& net, const PcaModel& pca, const PipelineConfig& config) {
  if (!roi.inside(image.width(), image.height()))
    throw std::out_of_range("query ROI " + to_string(roi) + " outside the " +
                            std::to_string(image.width()) + "x" + std::to_string(image.height()) + " image");
  const int final_layer = net.tap("final");
  const EncodeOptions& options = config.encoder.options;

  switch (model) {
    case QueryModel::FullQuery:
      return encode(forward(net, image, final_layer), pca, options);
    case QueryModel::CroppedRoi:
      return encode(forward(net, image.crop(roi), final_layer), pca, options);
    case QueryModel::CroppedActivation: {
      const FeatureMap map = forward(net, image, final_layer);
      const Rect area = project_roi(net, roi, final_layer, image.width(), image.height());
      return encode_region(map, area, pca, options);
    }
    case QueryModel::SpatialAttention: {
      const int tap_layer = net.tap(config.attention_tap);
      const FeatureMap tap_map = forward(net, image, tap_layer);
      const Rect projection = project_roi(net, roi, tap_layer, image.width(), image.height());
      return encode(attend(tap_map, tap_layer, projection, net, config.attention), pca, options);
    }
  }
  throw std::logic_error("unhandled query model");
}

Descriptor encode_query(const Image& image, const QuerySpec& query, const NetworkSpec& net,
                        const PcaModel& pca, const PipelineConfig& config) {
  if (!query.roi.inside(image.width(), image.height()))
    throw std::out_of_range("query ROI " + to_string(query.roi) + " outside image");
  if (query.model == QueryModel::SpatialAttention && !net.has_tap(config.attention_tap))
    throw std::out_of_range("network has no tap named \"" + config.attention_tap + "\"");

  const int min_side = min_input_size(net);
  if (query.model == QueryModel::CroppedRoi) {
    const Image crop = image.crop(query.roi);
    return encode_multiscale(crop, config.encoder.scales, min_side, [&](const Image& scaled) {
      return encode_query_scale(scaled, scaled.bounds(), QueryModel::FullQuery, net, pca, config);
    });
  }
  return encode_multiscale(image, config.encoder.scales, min_side, [&](const Image& scaled) {
    const Rect roi = scale_rect(query.roi, image.width(), image.height(), scaled.width(), scaled.height());
    return encode_query_scale(scaled, roi, query.model, net, pca, config);
  });
}

Descriptor encode_database_plain(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                                 const PipelineConfig& config) {
  return encode_multiscale(image, net, pca, config.encoder);
}

Descriptor encode_database_sa_scale(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                                    const PipelineConfig& config, int* roi_count) {
  const int final_layer = net.tap("final");
  const int tap_layer = net.tap(config.attention_tap);
  const EncodeOptions& options = config.encoder.options;

  const FeatureMap tap_map = forward(net, image, tap_layer);
  const FeatureMap final_map = forward(net, tap_map, tap_layer + 1, final_layer);
  const Descriptor first_pass = encode(final_map, pca, options);

  const BinaryMap salient = resize_binary(binarize(compute_saliency(final_map), config.tau),
                                          static_cast<int>(tap_map.width()),
                                          static_cast<int>(tap_map.height()));
  const std::vector<Rect> rois = connected_components(salient, config.min_area);
  if (roi_count) *roi_count = static_cast<int>(rois.size());
  if (rois.empty()) return first_pass;

  Descriptor sum = first_pass;
  for (const Rect& roi : rois) sum += encode(attend(tap_map, tap_layer, roi, net, config.attention), pca, options);
  return l2_normalize(sum);
}

Descriptor encode_database_sa(const Image& image, const NetworkSpec& net, const PcaModel& pca,
                              const PipelineConfig& config) {
  return encode_multiscale(image, config.encoder.scales, min_input_size(net), [&](const Image& scaled) {
    return encode_database_sa_scale(scaled, net, pca, config);
  });
}

// ---------------------------------------------------------------------------
// Index

void DescriptorIndex::add(std::string id, Descriptor descriptor) {
  if (entries_.empty() && dim_ == 0) dim_ = descriptor.size();
  if (descriptor.size() != dim_)
    throw std::invalid_argument("descriptor dimension " + std::to_string(descriptor.size()) +
                                " != index dimension " + std::to_string(dim_));
  if (!ids_.insert(id).second) throw std::invalid_argument("duplicate index id \"" + id + "\"");
  entries_.push_back({std::move(id), std::move(descriptor)});
}

std::vector<SearchHit> search(const DescriptorIndex& index, const Descriptor& query, std::size_t k) {
  if (index.empty()) throw std::invalid_argument("search on an empty index");
  if (query.size() != index.dim())
    throw std::invalid_argument("query dimension " + std::to_string(query.size()) +
                                " != index dimension " + std::to_string(index.dim()));
  if (k < 1) throw std::invalid_argument("k must be >= 1");

  std::vector<SearchHit> hits;
  hits.reserve(index.size());
  for (const auto& e : index.entries()) hits.push_back({e.id, e.descriptor.dot(query)});
  const auto better = [](const SearchHit& a, const SearchHit& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  };
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
  hits.resize(k);
  return hits;
}

void write_index(const DescriptorIndex& index, std::ostream& out) {
  binary::put_magic(out, "DIDX");
  binary::put_u32(out, kIndexVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(index.size()));
  binary::put_u32(out, static_cast<std::uint32_t>(index.dim()));
  for (const auto& e : index.entries()) {
    binary::put_string(out, e.id);
    for (Index i = 0; i < e.descriptor.size(); ++i) binary::put_f32(out, static_cast<float>(e.descriptor[i]));
  }
  if (!out) throw std::ios_base::failure("DIDX write failed");
}

DescriptorIndex read_index(std::istream& in) {
  binary::expect_magic(in, "DIDX");
  const auto version = binary::get_u32(in, "DIDX version");
  if (version != kIndexVersion) throw FormatError("unsupported DIDX version " + std::to_string(version));
  const auto count = binary::get_u32(in, "DIDX count");
  const auto dim = binary::get_u32(in, "DIDX dimension");
  if (dim == 0 || dim > (1u << 20)) throw FormatError("invalid DIDX dimension");
  DescriptorIndex index(dim);
  for (std::uint32_t n = 0; n < count; ++n) {
    std::string id = binary::get_string(in, "DIDX id", 1u << 16);
    Descriptor d(dim);
    for (Index i = 0; i < d.size(); ++i) d[i] = binary::get_f32(in, "DIDX descriptor");
    try {
      index.add(std::move(id), std::move(d));
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after DIDX entries");
  return index;
}

void save_index(const DescriptorIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  write_index(index, out);
}

DescriptorIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_index(in);
}

}  // namespace ctxr
