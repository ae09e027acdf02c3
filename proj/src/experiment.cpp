#include "ctxr/experiment.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace ctxr {

namespace {

const Image& image_of(const ImageSet& images, const std::string& id) {
  const auto it = images.find(id);
  if (it == images.end()) throw std::out_of_range("image \"" + id + "\" not loaded");
  return it->second;
}

const char* encoder_name(bool weighted) { return weighted ? "wrmac" : "rmac"; }

}  // namespace

Eigen::MatrixXd harvest_region_vectors(const DatasetManifest& manifest, const ImageSet& images,
                                       const NetworkSpec& net, const EncoderConfig& config) {
  std::vector<Eigen::VectorXd> rows;
  const int final_layer = net.tap("final");
  for (const auto& entry : manifest.images) {
    const Image& img = image_of(images, entry.id);
    for (const int s : config.scales) {
      const auto [w, h] = scaled_size(img.width(), img.height(), s);
      const FeatureMap map = forward(net, resize_bilinear(img, w, h), final_layer);
      for (auto& v : region_vectors(map, {0, 0, static_cast<int>(map.width()), static_cast<int>(map.height())},
                                    config.options.grid_scales))
        if (!v.isZero(0.0)) rows.push_back(std::move(v));
    }
  }
  if (rows.empty()) throw std::runtime_error("no region vectors harvested");
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i].transpose();
  return out;
}

DescriptorIndex build_index(const DatasetManifest& manifest, const ImageSet& images, const NetworkSpec& net,
                            const PcaModel& pca, const PipelineConfig& config, bool database_sa) {
  DescriptorIndex index(pca.output_dim());
  for (const auto& entry : manifest.images) {
    const Image& img = image_of(images, entry.id);
    index.add(entry.id, database_sa ? encode_database_sa(img, net, pca, config)
                                    : encode_database_plain(img, net, pca, config));
  }
  return index;
}

const EvalCell* EvalReport::find(QueryModel model, bool weighted) const {
  for (const auto& c : cells)
    if (c.model == model && c.weighted == weighted) return &c;
  return nullptr;
}

EvalReport run_eval(const DatasetManifest& manifest, const ImageSet& images, const NetworkSpec& net,
                    const PcaModel& pca, const PipelineConfig& config, const EvalOptions& options) {
  EvalReport report;
  report.database_sa = options.database_sa;
  report.n_queries = manifest.queries.size();
  report.n_images = manifest.images.size();

  std::map<std::string, Relevance> relevance;
  for (const auto& q : manifest.queries) relevance[q.id] = manifest.relevance(q, options.self_as_junk);

  for (const bool weighted : options.weighted) {
    PipelineConfig cfg = config;
    cfg.encoder.options.weighted = weighted;
    const DescriptorIndex index = build_index(manifest, images, net, pca, cfg, options.database_sa);

    for (const QueryModel model : options.models) {
      EvalCell cell{model, weighted, 0.0, {}};
      std::map<std::string, std::vector<std::string>> rankings;
      for (const auto& q : manifest.queries) {
        const Descriptor d = encode_query(image_of(images, q.image), {q.roi, model}, net, pca, cfg);
        std::vector<std::string> ranking;
        for (auto& hit : search(index, d, index.size())) ranking.push_back(std::move(hit.id));
        cell.ap[q.id] = average_precision(ranking, relevance.at(q.id));
        rankings[q.id] = std::move(ranking);
      }
      cell.map = mean_average_precision(rankings, relevance);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "mAP (%) over " << n_queries << " queries, " << n_images << " database images"
      << (database_sa ? ", database-side attention" : "") << "\n";
  out << "model      R-MAC    WRMAC\n";
  for (const QueryModel m : {QueryModel::CroppedRoi, QueryModel::CroppedActivation, QueryModel::FullQuery,
                             QueryModel::SpatialAttention}) {
    const EvalCell* plain = find(m, false);
    const EvalCell* weighted = find(m, true);
    if (!plain && !weighted) continue;
    char line[96];
    const auto cell = [](const EvalCell* c) {
      char buf[16];
      if (c) std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * c->map);
      else std::snprintf(buf, sizeof buf, "%8s", "-");
      return std::string(buf);
    };
    std::string name = to_string(m);
    for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    std::snprintf(line, sizeof line, "%-8s %s %s\n", name.c_str(), cell(plain).c_str(), cell(weighted).c_str());
    out << line;
  }
  return out.str();
}

std::string EvalReport::to_json(const PipelineConfig& config) const {
  using nlohmann::json;
  json cells_json = json::array();
  for (const auto& c : cells)
    cells_json.push_back({{"model", to_string(c.model)}, {"encoder", encoder_name(c.weighted)}, {"map", c.map},
                          {"ap", c.ap}});
  json doc{{"schema", "ctxr-eval-report/1"},
           {"n_queries", n_queries},
           {"n_images", n_images},
           {"database_sa", database_sa},
           {"config",
            {{"scales", config.encoder.scales},
             {"grid_scales", config.encoder.options.grid_scales},
             {"tap", config.attention_tap},
             {"lambda1", config.attention.lambda1},
             {"lambda2", config.attention.lambda2},
             {"phi", config.attention.phi},
             {"tau", config.tau},
             {"min_area", config.min_area}}},
           {"cells", std::move(cells_json)}};
  return doc.dump(2) + "\n";
}

}  // namespace ctxr
