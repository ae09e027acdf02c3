#include "ctxr/eval.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace ctxr {

double average_precision(std::span<const std::string> ranking, const Relevance& relevance) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ranking)
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate id \"" + id + "\" in ranking");

  if (relevance.positive.empty()) {
    std::clog << "warning: query without positives, AP taken as 0\n";
    return 0.0;
  }
  double sum = 0.0;
  long rank = 0;
  long hits = 0;
  for (const auto& id : ranking) {
    if (relevance.junk.contains(id)) continue;
    ++rank;
    if (relevance.positive.contains(id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(relevance.positive.size());
}

double mean_average_precision(const std::map<std::string, std::vector<std::string>>& rankings,
                              const std::map<std::string, Relevance>& relevance) {
  if (relevance.empty()) throw std::invalid_argument("no queries to evaluate");
  double sum = 0.0;
  for (const auto& [query, rel] : relevance) {
    const auto it = rankings.find(query);
    if (it == rankings.end()) throw std::invalid_argument("no ranking for query \"" + query + "\"");
    sum += average_precision(it->second, rel);
  }
  return sum / static_cast<double>(relevance.size());
}

// ---------------------------------------------------------------------------
// Manifest

void DatasetManifest::validate() const {
  std::map<std::string, const ImageEntry*> by_id;
  for (const auto& img : images) {
    if (img.id.empty()) throw std::invalid_argument("image with empty id");
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("image \"" + img.id + "\" has no size");
    if (!by_id.emplace(img.id, &img).second) throw std::invalid_argument("duplicate image id \"" + img.id + "\"");
  }
  std::set<std::string> query_ids;
  for (const auto& q : queries) {
    if (!query_ids.insert(q.id).second) throw std::invalid_argument("duplicate query id \"" + q.id + "\"");
    const auto it = by_id.find(q.image);
    if (it == by_id.end()) throw std::invalid_argument("query \"" + q.id + "\" names unknown image");
    if (!q.roi.inside(it->second->width, it->second->height))
      throw std::invalid_argument("query \"" + q.id + "\" ROI " + to_string(q.roi) + " outside its image");
    const std::set<std::string> pos(q.positive.begin(), q.positive.end());
    for (const auto& id : q.positive)
      if (!by_id.contains(id)) throw std::invalid_argument("query \"" + q.id + "\" lists unknown positive " + id);
    for (const auto& id : q.junk) {
      if (!by_id.contains(id)) throw std::invalid_argument("query \"" + q.id + "\" lists unknown junk " + id);
      if (pos.contains(id)) throw std::invalid_argument("query \"" + q.id + "\" lists " + id + " as positive and junk");
    }
  }
}

const ImageEntry& DatasetManifest::image(const std::string& id) const {
  for (const auto& img : images)
    if (img.id == id) return img;
  throw std::out_of_range("unknown image id \"" + id + "\"");
}

Relevance DatasetManifest::relevance(const QueryEntry& query, bool self_as_junk) const {
  Relevance r{{query.positive.begin(), query.positive.end()}, {query.junk.begin(), query.junk.end()}};
  if (self_as_junk) {
    r.positive.erase(query.image);
    r.junk.insert(query.image);
  }
  return r;
}

using nlohmann::json;

DatasetManifest parse_manifest(const std::string& json_text) {
  DatasetManifest m;
  try {
    const json doc = json::parse(json_text);
    for (const json& j : doc.at("images"))
      m.images.push_back({j.at("id").get<std::string>(), j.at("path").get<std::string>(), j.at("w").get<int>(),
                          j.at("h").get<int>()});
    for (const json& j : doc.at("queries")) {
      QueryEntry q;
      q.id = j.at("id").get<std::string>();
      q.image = j.at("image").get<std::string>();
      const auto roi = j.at("roi").get<std::vector<int>>();
      if (roi.size() != 4) throw FormatError("query \"" + q.id + "\" roi needs 4 numbers");
      q.roi = {roi[0], roi[1], roi[2], roi[3]};
      q.positive = j.value("positive", std::vector<std::string>{});
      q.junk = j.value("junk", std::vector<std::string>{});
      m.queries.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json images = json::array();
  for (const auto& img : manifest.images)
    images.push_back({{"id", img.id}, {"path", img.path}, {"w", img.width}, {"h", img.height}});
  json queries = json::array();
  for (const auto& q : manifest.queries)
    queries.push_back({{"id", q.id},
                       {"image", q.image},
                       {"roi", {q.roi.x0, q.roi.y0, q.roi.x1, q.roi.y1}},
                       {"positive", q.positive},
                       {"junk", q.junk}});
  return json{{"images", std::move(images)}, {"queries", std::move(queries)}}.dump(1) + "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest);
}

std::map<std::string, Image> load_images(const DatasetManifest& manifest, const std::filesystem::path& root) {
  std::map<std::string, Image> out;
  for (const auto& entry : manifest.images) {
    Image img = load_ppm(root / entry.path);
    if (img.width() != entry.width || img.height() != entry.height)
      throw FormatError("image " + entry.id + " is " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()) + ", manifest says " + std::to_string(entry.width) + "x" +
                        std::to_string(entry.height));
    out.emplace(entry.id, std::move(img));
  }
  return out;
}

}  // namespace ctxr
