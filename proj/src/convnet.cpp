#include "ctxr/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "ctxr/binary_io.hpp"

namespace ctxr {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Convolution: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "conv" || name == "convolution") return LayerKind::Convolution;
  if (name == "relu") return LayerKind::Relu;
  if (name == "maxpool" || name == "pool") return LayerKind::MaxPool;
  throw FormatError("unknown layer kind \"" + name + "\"");
}

LayerSpec LayerSpec::convolution(int in_channels, int out_channels, int kernel, int stride,
                                 int padding) {
  LayerSpec l;
  l.kind = LayerKind::Convolution;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(int kernel, int stride, int padding) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

NetworkSpec::NetworkSpec(std::vector<LayerSpec> layers, std::map<std::string, int> taps)
    : layers_(std::move(layers)), taps_(std::move(taps)) {
  validate();
}

const LayerSpec& NetworkSpec::layer(int index) const {
  if (index < 1 || index > size())
    throw std::out_of_range("layer index " + std::to_string(index) + " outside [1, " +
                            std::to_string(size()) + "]");
  return layers_[static_cast<std::size_t>(index - 1)];
}

int NetworkSpec::tap(const std::string& name) const {
  const auto it = taps_.find(name);
  if (it == taps_.end()) throw std::out_of_range("network has no tap named \"" + name + "\"");
  return it->second;
}

int NetworkSpec::channels_after(int layer) const {
  int channels = 0;
  for (const LayerSpec& l : layers_)
    if (l.kind == LayerKind::Convolution) {
      channels = l.in_channels;
      break;
    }
  for (int i = 1; i <= layer; ++i)
    if (this->layer(i).kind == LayerKind::Convolution) channels = this->layer(i).out_channels;
  return channels;
}

bool NetworkSpec::has_weights() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const LayerSpec& l) {
    return l.kind != LayerKind::Convolution || l.has_weights();
  });
}

void NetworkSpec::validate() const {
  if (layers_.empty()) throw std::invalid_argument("network has no layers");
  int channels = channels_after(0);
  for (int i = 1; i <= size(); ++i) {
    const LayerSpec& l = layer(i);
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::Convolution: {
        if (l.kernel < 1 || l.kernel % 2 == 0)
          throw std::invalid_argument(where + "convolution kernel must be odd");
        if (l.in_channels != channels)
          throw std::invalid_argument(where + "expects " + std::to_string(l.in_channels) +
                                      " input channels, previous layer produces " +
                                      std::to_string(channels));
        if (l.out_channels < 1) throw std::invalid_argument(where + "out_channels must be >= 1");
        const auto per_out = static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels;
        if (l.has_weights()) {
          if (l.weights.size() != per_out * l.out_channels)
            throw std::invalid_argument(where + "weight count does not match out_channels");
          if (l.bias.size() != static_cast<std::size_t>(l.out_channels))
            throw std::invalid_argument(where + "bias count does not match out_channels");
        }
        channels = l.out_channels;
        break;
      }
      case LayerKind::Relu:
        if (l.kernel != 1 || l.stride != 1 || l.padding != 0)
          throw std::invalid_argument(where + "relu takes no parameters");
        break;
      case LayerKind::MaxPool:
        if (l.kernel < 1) throw std::invalid_argument(where + "pool kernel must be >= 1");
        if (l.padding >= l.kernel)
          throw std::invalid_argument(where + "pool padding must be smaller than its kernel");
        break;
    }
    if (l.stride < 1) throw std::invalid_argument(where + "stride must be >= 1");
    if (l.padding < 0) throw std::invalid_argument(where + "padding must be >= 0");
  }
  const auto final = taps_.find("final");
  if (final == taps_.end() || final->second != size())
    throw std::invalid_argument("tap \"final\" must exist and name the last layer");
  for (const auto& [name, index] : taps_)
    if (index < 1 || index > size())
      throw std::invalid_argument("tap \"" + name + "\" names a missing layer");
}

namespace {

int layer_output_extent(const LayerSpec& l, int n) {
  if (n < 1) return 0;
  if (l.kind == LayerKind::Relu) return n;
  if (n + 2 * l.padding < l.kernel) return 0;
  return (n + 2 * l.padding - l.kernel) / l.stride + 1;
}

FeatureMap apply_convolution(const LayerSpec& l, const FeatureMap& in) {
  const int W = static_cast<int>(in.width());
  const int H = static_cast<int>(in.height());
  const int ow = layer_output_extent(l, W);
  const int oh = layer_output_extent(l, H);
  if (ow < 1 || oh < 1)
    throw std::invalid_argument("input " + std::to_string(W) + "x" + std::to_string(H) +
                                " smaller than convolution kernel after padding");
  const int k = l.kernel, s = l.stride, p = l.padding;

  FeatureMap out(ow, oh, l.out_channels);
  for (int oc = 0; oc < l.out_channels; ++oc) {
    auto dst = out.channel(oc);
    dst.setConstant(l.bias[static_cast<std::size_t>(oc)]);
    for (int ic = 0; ic < l.in_channels; ++ic) {
      const auto src = in.channel(ic);
      const float* wk =
          l.weights.data() + (static_cast<std::size_t>(oc) * l.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const float w = wk[ky * k + kx];
          if (w == 0.0f) continue;
          // ox range whose input column ox*s + kx - p stays inside [0, W)
          const int ox_lo = std::max(0, (p - kx + s - 1) / s);
          const int ox_hi = std::min(ow - 1, (W - 1 + p - kx) >= 0 ? (W - 1 + p - kx) / s : -1);
          if (ox_lo > ox_hi) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s + ky - p;
            if (iy < 0 || iy >= H) continue;
            float* drow = &dst(oy, 0);
            const float* srow = src.data() + static_cast<std::ptrdiff_t>(iy) * W;
            if (s == 1) {
              const int shift = kx - p;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) drow[ox] += w * srow[ox + shift];
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) drow[ox] += w * srow[ox * s + kx - p];
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureMap apply_relu(const FeatureMap& in) {
  FeatureMap out = in;
  out.values() = out.values().cwiseMax(0.0f);
  out.set_rectified(true);
  return out;
}

FeatureMap apply_maxpool(const LayerSpec& l, const FeatureMap& in) {
  const int W = static_cast<int>(in.width());
  const int H = static_cast<int>(in.height());
  const int ow = layer_output_extent(l, W);
  const int oh = layer_output_extent(l, H);
  if (ow < 1 || oh < 1)
    throw std::invalid_argument("input " + std::to_string(W) + "x" + std::to_string(H) +
                                " smaller than pooling window after padding");
  FeatureMap out(ow, oh, in.channels());
  for (Index c = 0; c < in.channels(); ++c) {
    const auto src = in.channel(c);
    auto dst = out.channel(c);
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = std::max(0, oy * l.stride - l.padding);
      const int y1 = std::min(H, oy * l.stride - l.padding + l.kernel);
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = std::max(0, ox * l.stride - l.padding);
        const int x1 = std::min(W, ox * l.stride - l.padding + l.kernel);
        dst(oy, ox) = src.block(y0, x0, y1 - y0, x1 - x0).maxCoeff();
      }
    }
  }
  return out;
}

}  // namespace

std::pair<int, int> output_size(const NetworkSpec& net, int layer, int width, int height) {
  for (int i = 1; i <= layer; ++i) {
    width = layer_output_extent(net.layer(i), width);
    height = layer_output_extent(net.layer(i), height);
    if (width < 1 || height < 1) return {0, 0};
  }
  return {width, height};
}

int min_input_size(const NetworkSpec& net) {
  for (int n = 1;; ++n)
    if (output_size(net, net.size(), n, n).first >= 1) return n;
}

FeatureMap forward(const NetworkSpec& net, const FeatureMap& input, int from_layer, int to_layer) {
  if (from_layer < 1 || to_layer > net.size() || from_layer > to_layer + 1)
    throw std::out_of_range("invalid layer range [" + std::to_string(from_layer) + ", " +
                            std::to_string(to_layer) + "]");
  if (from_layer == to_layer + 1) return input;
  const int expected = net.channels_after(from_layer - 1);
  if (expected != 0 && input.channels() != expected)
    throw std::invalid_argument("layer " + std::to_string(from_layer) + " expects " +
                                std::to_string(expected) + " channels, got " +
                                std::to_string(input.channels()));

  FeatureMap x = input;
  for (int i = from_layer; i <= to_layer; ++i) {
    const LayerSpec& l = net.layer(i);
    switch (l.kind) {
      case LayerKind::Convolution:
        if (!l.has_weights())
          throw std::logic_error("layer " + std::to_string(i) + " has no weights (geometry-only spec)");
        x = apply_convolution(l, x);
        break;
      case LayerKind::Relu: x = apply_relu(x); break;
      case LayerKind::MaxPool: x = apply_maxpool(l, x); break;
    }
  }
  x.set_rectified(net.layer(to_layer).kind == LayerKind::Relu);
  return x;
}

FeatureMap forward(const NetworkSpec& net, const Image& image, int to_layer) {
  return forward(net, image.planes(), 1, to_layer);
}

RFParams rf_params(const NetworkSpec& net, int layer) {
  RFParams rf;
  for (int i = 1; i <= layer; ++i) {
    const LayerSpec& l = net.layer(i);
    rf.size += (l.kernel - 1) * rf.stride;
    rf.offset += ((l.kernel - 1) / 2.0 - l.padding) * rf.stride;
    rf.stride *= l.stride;
  }
  return rf;
}

namespace {

// Half-open index range of activations whose centers lie in [lo, hi).
std::pair<int, int> centers_inside(const RFParams& rf, int count, int lo, int hi) {
  int first = count, last = -1;
  for (int i = 0; i < count; ++i) {
    const double c = rf.center(i);
    if (c >= lo && c < hi) {
      first = std::min(first, i);
      last = i;
    }
  }
  return {first, last + 1};
}

int nearest_center(const RFParams& rf, int count, double target) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double d = std::abs(rf.center(i) - target);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

Rect project_roi(const NetworkSpec& net, const Rect& roi, int layer, int image_width,
                 int image_height) {
  if (!roi.inside(image_width, image_height))
    throw std::out_of_range("ROI " + to_string(roi) + " outside " + std::to_string(image_width) +
                            "x" + std::to_string(image_height) + " image");
  const auto [w, h] = output_size(net, layer, image_width, image_height);
  if (w < 1 || h < 1) throw std::invalid_argument("image too small for layer");
  const RFParams rf = rf_params(net, layer);

  const auto [x0, x1] = centers_inside(rf, w, roi.x0, roi.x1);
  const auto [y0, y1] = centers_inside(rf, h, roi.y0, roi.y1);
  if (x0 < x1 && y0 < y1) return {x0, y0, x1, y1};

  const int nx = nearest_center(rf, w, (roi.x0 + roi.x1) / 2.0);
  const int ny = nearest_center(rf, h, (roi.y0 + roi.y1) / 2.0);
  return {nx, ny, nx + 1, ny + 1};
}

void fill_uniform_weights(NetworkSpec& net, std::uint64_t seed, double bound) {
  std::mt19937_64 rng(seed);
  std::vector<LayerSpec> layers = net.layers();
  for (LayerSpec& l : layers) {
    if (l.kind != LayerKind::Convolution) continue;
    l.weights.resize(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel);
    for (float& w : l.weights) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      w = static_cast<float>(-bound + 2.0 * bound * u);
    }
    l.bias.assign(static_cast<std::size_t>(l.out_channels), 0.0f);
  }
  net = NetworkSpec(std::move(layers), net.taps());
  net.seed = seed;
}

NetworkSpec toy_network(std::uint64_t seed) {
  NetworkSpec net({LayerSpec::convolution(3, 8, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
                   LayerSpec::convolution(8, 16, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
                   LayerSpec::convolution(16, 32, 3, 1, 1), LayerSpec::relu()},
                  {{"low", 2}, {"mid", 5}, {"final", 8}});
  fill_uniform_weights(net, seed);
  return net;
}

// ---------------------------------------------------------------------------
// JSON network spec

using nlohmann::json;

NetworkSpec load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  std::vector<LayerSpec> layers;
  std::map<std::string, int> taps;
  try {
    if (doc.value("version", 1) != 1) throw FormatError("unsupported network-spec version");
    for (const json& jl : doc.at("layers")) {
      LayerSpec l;
      l.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      if (l.kind != LayerKind::Relu) {
        l.kernel = jl.at("kernel").get<int>();
        l.stride = jl.value("stride", 1);
        l.padding = jl.value("padding", 0);
      }
      if (l.kind == LayerKind::Convolution) {
        l.in_channels = jl.at("in_channels").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
      }
      layers.push_back(std::move(l));
    }
    taps = doc.at("taps").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  NetworkSpec net;
  try {
    net = NetworkSpec(std::move(layers), std::move(taps));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  if (doc.contains("seed")) {
    fill_uniform_weights(net, doc.at("seed").get<std::uint64_t>());
  } else if (doc.contains("weights")) {
    std::filesystem::path blob = doc.at("weights").get<std::string>();
    if (blob.is_relative()) blob = path.parent_path() / blob;
    std::ifstream wb(blob, std::ios::binary);
    if (!wb) throw std::ios_base::failure("cannot open weights blob " + blob.string());
    std::vector<LayerSpec> filled = net.layers();
    for (LayerSpec& l : filled) {
      if (l.kind != LayerKind::Convolution) continue;
      l.weights.resize(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel);
      for (float& w : l.weights) w = binary::get_f32(wb, "weights blob");
      l.bias.resize(static_cast<std::size_t>(l.out_channels));
      for (float& b : l.bias) b = binary::get_f32(wb, "weights blob");
    }
    if (wb.peek() != std::char_traits<char>::eof())
      throw FormatError("weights blob " + blob.string() + " has trailing bytes");
    net = NetworkSpec(std::move(filled), net.taps());
  }
  return net;
}

void save_network(const NetworkSpec& net, const std::filesystem::path& path,
                  const std::filesystem::path& weights_blob) {
  json doc;
  doc["version"] = 1;
  json layers = json::array();
  for (const LayerSpec& l : net.layers()) {
    json jl{{"kind", to_string(l.kind)}};
    if (l.kind != LayerKind::Relu) {
      jl["kernel"] = l.kernel;
      jl["stride"] = l.stride;
      jl["padding"] = l.padding;
    }
    if (l.kind == LayerKind::Convolution) {
      jl["in_channels"] = l.in_channels;
      jl["out_channels"] = l.out_channels;
    }
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  doc["taps"] = net.taps();

  if (!weights_blob.empty()) {
    if (!net.has_weights()) throw std::invalid_argument("cannot write weights of a geometry-only spec");
    const auto blob_path = weights_blob.is_relative() ? path.parent_path() / weights_blob : weights_blob;
    std::ofstream wb(blob_path, std::ios::binary);
    if (!wb) throw std::ios_base::failure("cannot open " + blob_path.string() + " for writing");
    for (const LayerSpec& l : net.layers()) {
      if (l.kind != LayerKind::Convolution) continue;
      for (float w : l.weights) binary::put_f32(wb, w);
      for (float b : l.bias) binary::put_f32(wb, b);
    }
    doc["weights"] = weights_blob.string();
  } else if (net.seed) {
    doc["seed"] = *net.seed;
  }

  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
}

}  // namespace ctxr
