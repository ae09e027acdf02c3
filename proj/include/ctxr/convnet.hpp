#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctxr/image.hpp"
#include "ctxr/tensor.hpp"

namespace ctxr {

enum class LayerKind { Convolution, Relu, MaxPool };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int in_channels = 0;   // convolution only
  int out_channels = 0;  // convolution only
  std::vector<float> weights;  // (out, in, ky, kx), convolution only
  std::vector<float> bias;     // out, convolution only

  static LayerSpec convolution(int in_channels, int out_channels, int kernel, int stride, int padding);
  static LayerSpec relu();
  static LayerSpec maxpool(int kernel, int stride, int padding = 0);

  bool has_weights() const { return !weights.empty(); }
};

/// Cumulative receptive-field geometry of one layer's activations.
///
/// Activation i along an axis is centered on input pixel coordinate i * stride + offset
/// and spans `size` pixels.
struct RFParams {
  int stride = 1;
  int size = 1;
  double offset = 0.0;

  double center(int i) const { return i * static_cast<double>(stride) + offset; }
};

/// Ordered layer list with named taps. Layer indices are 1-based.
class NetworkSpec {
 public:
  NetworkSpec() = default;
  NetworkSpec(std::vector<LayerSpec> layers, std::map<std::string, int> taps);

  int size() const { return static_cast<int>(layers_.size()); }
  const LayerSpec& layer(int index) const;
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::map<std::string, int>& taps() const { return taps_; }

  /// Layer index of a named tap; throws std::out_of_range for unknown names.
  int tap(const std::string& name) const;
  bool has_tap(const std::string& name) const { return taps_.contains(name); }

  /// Channel count produced by `layer`. Layer 0 is the input, whose channel count is set by the
  /// first convolution; 0 means any count passes (no convolution up to `layer`).
  int channels_after(int layer) const;

  /// True when every convolution carries weights; geometry-only specs cannot forward.
  bool has_weights() const;

  /// Throws std::invalid_argument when the layer chain or taps are inconsistent.
  void validate() const;

  /// Seed the weights were generated from, when they were.
  std::optional<std::uint64_t> seed;

 private:
  std::vector<LayerSpec> layers_;
  std::map<std::string, int> taps_;
};

/// Output spatial size after applying layers 1..layer to a width x height input.
/// Returns {0, 0} when some layer's window does not fit.
std::pair<int, int> output_size(const NetworkSpec& net, int layer, int width, int height);

/// Smallest square input producing at least one activation at every layer.
int min_input_size(const NetworkSpec& net);

/// Applies layers from_layer..to_layer (1-based, inclusive).
///
/// from_layer == to_layer + 1 applies nothing and returns `input` as is, so a tap at the last
/// layer has zero remaining layers. The result is flagged rectified iff to_layer is a relu.
FeatureMap forward(const NetworkSpec& net, const FeatureMap& input, int from_layer, int to_layer);

/// Runs the image through layers 1..to_layer.
FeatureMap forward(const NetworkSpec& net, const Image& image, int to_layer);

RFParams rf_params(const NetworkSpec& net, int layer);

/// Bounding rect of the activations at `layer` whose receptive-field centers lie inside the
/// half-open pixel ROI on both axes. When none do, the single activation whose center is
/// nearest the ROI center is returned.
Rect project_roi(const NetworkSpec& net, const Rect& roi, int layer, int image_width,
                 int image_height);

/// conv(3->8) relu pool conv(8->16) relu pool conv(16->32) relu, weights uniform in [-0.1, 0.1]
/// drawn from mt19937_64(seed); zero biases. Taps low=2, mid=5, final=8.
NetworkSpec toy_network(std::uint64_t seed);

/// Fills every convolution's weights from mt19937_64(seed) in layer order, (out, in, ky, kx)
/// within a layer; biases are zeroed.
void fill_uniform_weights(NetworkSpec& net, std::uint64_t seed, double bound = 0.1);

// Network-spec JSON:
//   {"version": 1, "layers": [{"kind": "conv", "kernel": 3, "stride": 1, "padding": 1,
//    "in_channels": 3, "out_channels": 8}, {"kind": "relu"}, ...],
//    "taps": {"low": 2, ...}, "seed": 0 | "weights": "blob.bin"}
// The weights blob is float32 LE in layer order, each conv layer contributing its
// (out, in, ky, kx) weights followed by its `out` biases. With neither key the network is
// geometry-only (rf_params and project_roi work, forward throws).
NetworkSpec load_network(const std::filesystem::path& path);
void save_network(const NetworkSpec& net, const std::filesystem::path& path,
                  const std::filesystem::path& weights_blob = {});

}  // namespace ctxr
