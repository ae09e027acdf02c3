#include "ctxr/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ctxr/experiment.hpp"

namespace ctxr::cli {

namespace {

/// Options shared by every subcommand; settable from a TOML config via --config.
struct RunConfig {
  std::string network;  // network-spec JSON; empty selects the toy network
  std::uint64_t net_seed = 0;
  std::vector<int> scales{550, 800, 1050};
  int grid_scales = 3;
  bool weighted = true;
  AttentionParams attention;
  std::string tap = "mid";
  double tau = 0.7;
  long min_area = 1;

  NetworkSpec load_net() const {
    NetworkSpec net = network.empty() ? toy_network(net_seed) : load_network(network);
    if (!net.has_weights()) throw FormatError("network spec " + network + " carries no weights");
    return net;
  }

  PipelineConfig pipeline() const {
    for (int s : scales)
      if (s < 1) throw std::invalid_argument("scales must be positive");
    attention.validate();
    PipelineConfig c;
    c.encoder.scales = scales;
    c.encoder.options = {grid_scales, weighted};
    c.attention = attention;
    c.attention_tap = tap;
    c.tau = tau;
    c.min_area = min_area;
    return c;
  }
};

Rect parse_roi(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("--roi expects x0,y0,x1,y1, got \"" + text + "\"");
    }
  }
  if (v.size() != 4) throw std::invalid_argument("--roi expects x0,y0,x1,y1, got \"" + text + "\"");
  return {v[0], v[1], v[2], v[3]};
}

std::string describe_corpus(const std::string& manifest, const RunConfig& rc, std::size_t images) {
  std::ostringstream s;
  s << "manifest=" << std::filesystem::path(manifest).filename().string() << " images=" << images
    << " net=" << (rc.network.empty() ? "toy:" + std::to_string(rc.net_seed) : rc.network) << " scales=";
  for (std::size_t i = 0; i < rc.scales.size(); ++i) s << (i ? "," : "") << rc.scales[i];
  s << " grid=" << rc.grid_scales;
  return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware query encoding for particular-object retrieval", "ctxr"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option defaults (flags override it)");

  RunConfig rc;
  app.add_option("--network", rc.network, "Network-spec JSON (default: toy network)");
  app.add_option("--net-seed", rc.net_seed, "Toy-network weight seed")->capture_default_str();
  app.add_option("--scales", rc.scales, "Image long sides for multi-scale encoding")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--n-grid-scales", rc.grid_scales, "R-MAC grid scales")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--weighted,!--no-weighted", rc.weighted, "Saliency-weighted aggregation (WR-MAC)")
      ->capture_default_str();
  app.add_option("--lambda1", rc.attention.lambda1, "Attention floor")->capture_default_str();
  app.add_option("--lambda2", rc.attention.lambda2, "Attention saliency gain")->capture_default_str();
  app.add_option("--phi", rc.attention.phi, "Attention saliency exponent")->capture_default_str();
  app.add_option("--tap", rc.tap, "Layer tap the attention mask is applied at")->capture_default_str();
  app.add_option("--tau", rc.tau, "Database-side saliency threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_option("--min-area", rc.min_area, "Smallest database-side salient component, in cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Render the synthetic landmark dataset")->fallthrough();
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  int gen_images = 200;
  SyntheticConfig gen_cfg;
  bool gen_no_context = false;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--n-images", gen_images, "Database size (>= 20)")->capture_default_str();
  gen->add_option("--n-queries", gen_cfg.n_queries, "Queries (one landmark class each)")->capture_default_str();
  gen->add_option("--width", gen_cfg.width, "Image width")->capture_default_str();
  gen->add_option("--height", gen_cfg.height, "Image height")->capture_default_str();
  gen->add_flag("--no-context", gen_no_context, "Omit companion patterns (context uninformative)");

  // fit-pca
  auto* fit = app.add_subcommand("fit-pca", "Fit PCA whitening on database region vectors")->fallthrough();
  std::string fit_manifest, fit_out;
  int fit_dim = 32;
  fit->add_option("--manifest", fit_manifest, "Dataset manifest")->required();
  fit->add_option("--out", fit_out, "PCAW output file")->required();
  fit->add_option("--dim", fit_dim, "Output dimension K'")->capture_default_str();

  // index [build]
  auto* idx = app.add_subcommand("index", "Encode every database image into a DIDX index")->fallthrough();
  idx->add_subcommand("build", "Same as plain `index`")->fallthrough();
  idx->require_subcommand(0, 1);
  std::string idx_manifest, idx_pca, idx_out;
  bool idx_db_sa = false;
  idx->add_option("--manifest", idx_manifest, "Dataset manifest")->required();
  idx->add_option("--pca", idx_pca, "PCAW model")->required();
  idx->add_option("--out", idx_out, "DIDX output file")->required();
  idx->add_flag("--db-sa", idx_db_sa, "Database-side spatial attention");

  // query
  auto* qry = app.add_subcommand("query", "Encode one query and search an index")->fallthrough();
  std::string q_index, q_pca, q_image, q_roi, q_model = "sa";
  std::size_t q_k = 10;
  qry->add_option("--index", q_index, "DIDX index")->required();
  qry->add_option("--pca", q_pca, "PCAW model")->required();
  qry->add_option("--image", q_image, "Query image (binary PPM)")->required();
  qry->add_option("--roi", q_roi, "x0,y0,x1,y1 in pixels")->required();
  qry->add_option("--model", q_model, "fq | rq | aq | sa")->capture_default_str();
  qry->add_option("--k", q_k, "Results to print")->check(CLI::PositiveNumber)->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "mAP for each (query model x encoder) cell")->fallthrough();
  std::string ev_manifest, ev_pca, ev_report;
  std::vector<std::string> ev_models{"rq", "aq", "fq", "sa"}, ev_encoders{"rmac", "wrmac"};
  bool ev_db_sa = false, ev_keep_self = false;
  ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  ev->add_option("--pca", ev_pca, "PCAW model")->required();
  ev->add_option("--models", ev_models, "Query models")->delimiter(',')->capture_default_str();
  ev->add_option("--encoders", ev_encoders, "rmac and/or wrmac")->delimiter(',')->capture_default_str();
  ev->add_flag("--db-sa", ev_db_sa, "Database-side spatial attention");
  ev->add_flag("--keep-self", ev_keep_self, "Do not treat the query's own image as junk");
  ev->add_option("--report", ev_report, "Write the JSON report here");

  // project-roi
  auto* proj = app.add_subcommand("project-roi", "Show the activation rect a pixel ROI projects to")->fallthrough();
  std::string p_roi, p_tap = "final";
  int p_layer = 0, p_w = 0, p_h = 0;
  proj->add_option("--roi", p_roi, "x0,y0,x1,y1 in pixels")->required();
  proj->add_option("--width", p_w, "Image width")->required();
  proj->add_option("--height", p_h, "Image height")->required();
  auto* layer_opt = proj->add_option("--layer", p_layer, "1-based layer index");
  proj->add_option("--at", p_tap, "Tap name (ignored with --layer)")->excludes(layer_opt)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      gen_cfg.facilitatory_context = !gen_no_context;
      const SyntheticDataset ds = generate_synthetic(gen_seed, gen_images, gen_cfg);
      write_dataset(ds, gen_out);
      std::ofstream toml(std::filesystem::path(gen_out) / "desk.toml");
      toml << "# desk-scale encoding defaults for this dataset\nscales=[" << gen_cfg.width / 2 << ","
           << gen_cfg.width * 2 / 3 << "," << gen_cfg.width * 5 / 6 << "]\n";
      long positives = 0;
      for (const auto& q : ds.manifest.queries) positives += static_cast<long>(q.positive.size());
      out << "wrote " << ds.manifest.images.size() << " images and " << ds.manifest.queries.size() << " queries ("
          << positives << " positive labels) to " << gen_out << "\n";
      return kExitOk;
    }

    const PipelineConfig config = rc.pipeline();

    if (fit->parsed()) {
      const NetworkSpec net = rc.load_net();
      const DatasetManifest manifest = load_manifest(fit_manifest);
      const ImageSet images = load_images(manifest, std::filesystem::path(fit_manifest).parent_path());
      if (fit_dim > net.channels_after(net.tap("final")))
        throw std::invalid_argument("--dim " + std::to_string(fit_dim) + " exceeds the " +
                                    std::to_string(net.channels_after(net.tap("final"))) + " final-tap channels");
      const Eigen::MatrixXd samples = harvest_region_vectors(manifest, images, net, config.encoder);
      const PcaModel pca = fit_pca(samples, fit_dim, describe_corpus(fit_manifest, rc, manifest.images.size()));
      save_pca(pca, fit_out);
      out << "fitted PCA " << pca.input_dim() << " -> " << pca.output_dim() << " on " << samples.rows()
          << " region vectors; wrote " << fit_out << "\n";
      return kExitOk;
    }

    if (idx->parsed()) {
      const NetworkSpec net = rc.load_net();
      const PcaModel pca = load_pca(idx_pca);
      const DatasetManifest manifest = load_manifest(idx_manifest);
      const ImageSet images = load_images(manifest, std::filesystem::path(idx_manifest).parent_path());
      const DescriptorIndex index = build_index(manifest, images, net, pca, config, idx_db_sa);
      save_index(index, idx_out);
      out << "indexed " << index.size() << " images (dim " << index.dim() << ", "
          << (config.encoder.options.weighted ? "WR-MAC" : "R-MAC") << (idx_db_sa ? ", database SA" : "")
          << "); wrote " << idx_out << "\n";
      return kExitOk;
    }

    if (qry->parsed()) {
      const NetworkSpec net = rc.load_net();
      const PcaModel pca = load_pca(q_pca);
      const DescriptorIndex index = load_index(q_index);
      const Image image = load_ppm(q_image);
      const QuerySpec spec{parse_roi(q_roi), parse_query_model(q_model)};
      const Descriptor d = encode_query(image, spec, net, pca, config);
      int rank = 0;
      for (const auto& hit : search(index, d, q_k)) {
        char line[64];
        std::snprintf(line, sizeof line, "%4d  %+.6f  ", ++rank, hit.similarity);
        out << line << hit.id << "\n";
      }
      return kExitOk;
    }

    if (ev->parsed()) {
      const NetworkSpec net = rc.load_net();
      const PcaModel pca = load_pca(ev_pca);
      const DatasetManifest manifest = load_manifest(ev_manifest);
      const ImageSet images = load_images(manifest, std::filesystem::path(ev_manifest).parent_path());
      EvalOptions options;
      options.models.clear();
      for (const auto& m : ev_models) options.models.push_back(parse_query_model(m));
      options.weighted.clear();
      for (const auto& e : ev_encoders) {
        if (e == "rmac") options.weighted.push_back(false);
        else if (e == "wrmac") options.weighted.push_back(true);
        else throw std::invalid_argument("unknown encoder \"" + e + "\" (expected rmac or wrmac)");
      }
      options.database_sa = ev_db_sa;
      options.self_as_junk = !ev_keep_self;
      const EvalReport report = run_eval(manifest, images, net, pca, config, options);
      out << report.to_text();
      if (!ev_report.empty()) {
        std::ofstream rep(ev_report);
        if (!rep) throw std::ios_base::failure("cannot open " + ev_report + " for writing");
        rep << report.to_json(config);
      }
      return kExitOk;
    }

    if (proj->parsed()) {
      const NetworkSpec net = rc.network.empty() ? toy_network(rc.net_seed) : load_network(rc.network);
      const int layer = p_layer > 0 ? p_layer : net.tap(p_tap);
      const Rect roi = parse_roi(p_roi);
      const RFParams rf = rf_params(net, layer);
      const auto [w, h] = output_size(net, layer, p_w, p_h);
      const Rect r = project_roi(net, roi, layer, p_w, p_h);
      out << "layer " << layer << ": grid " << w << "x" << h << ", stride " << rf.stride << ", receptive field "
          << rf.size << ", offset " << rf.offset << "\n";
      out << "pixel ROI " << to_string(roi) << " -> activations " << to_string(r) << "\n";
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ctxr::cli
