#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxr/eval.hpp"
#include "ctxr/pipeline.hpp"

namespace ctxr {

using ImageSet = std::map<std::string, Image>;

/// l2-normalized regional MACs of every database image at the final tap, all scales, one per row.
/// Regions without activations are skipped.
Eigen::MatrixXd harvest_region_vectors(const DatasetManifest& manifest, const ImageSet& images,
                                       const NetworkSpec& net, const EncoderConfig& config);

/// Encodes every manifest image, in manifest order. `database_sa` selects the attention variant.
DescriptorIndex build_index(const DatasetManifest& manifest, const ImageSet& images, const NetworkSpec& net,
                            const PcaModel& pca, const PipelineConfig& config, bool database_sa);

struct EvalOptions {
  std::vector<QueryModel> models{QueryModel::CroppedRoi, QueryModel::CroppedActivation, QueryModel::FullQuery,
                                 QueryModel::SpatialAttention};
  std::vector<bool> weighted{false, true};  // R-MAC, WR-MAC columns
  bool database_sa = false;
  bool self_as_junk = true;
};

struct EvalCell {
  QueryModel model = QueryModel::FullQuery;
  bool weighted = false;
  double map = 0.0;
  std::map<std::string, double> ap;  // per query id
};

struct EvalReport {
  std::vector<EvalCell> cells;
  bool database_sa = false;
  std::size_t n_queries = 0;
  std::size_t n_images = 0;

  const EvalCell* find(QueryModel model, bool weighted) const;

  /// Rows RQ/AQ/FQ/SA (those requested), columns R-MAC/WRMAC, mAP in percent.
  std::string to_text() const;
  /// Machine-readable form; schema in docs/report-schema.json.
  std::string to_json(const PipelineConfig& config) const;
};

/// For every (model, encoder) cell: encode the database with that encoder, encode every query,
/// rank the whole database by dot product and average the APs.
EvalReport run_eval(const DatasetManifest& manifest, const ImageSet& images, const NetworkSpec& net,
                    const PcaModel& pca, const PipelineConfig& config, const EvalOptions& options);

}  // namespace ctxr
