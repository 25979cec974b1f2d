#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dbdn/ops.hpp"
#include "dbdn/tensor.hpp"

namespace dbdn {

enum class Variant : std::uint32_t {
  kDbdn = 0,           // deconvolution upsampler
  kDbdnPlus = 1,       // conv + pixel shuffle upsampler
  kWithoutInter = 2,   // blocks chained in a line
  kWithoutComp = 3,    // one wide dense block, growth 16
};

std::string_view variant_name(Variant v);
/// Accepts "dbdn", "dbdn+", "dbdn_plus", "wo_inter", "wo_comp" (case-insensitive).
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::kDbdn;
  int blocks = 16;
  int layers = 8;
  int n_r = 64;
  int n_g = 64;
  int scale = 2;
  /// When set, blocks b >= 2 also receive the extraction features L0 in front
  /// of [H_1 .. H_{b-1}]. Off by default.
  bool prepend_extraction = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  /// 16 blocks, 8 layers, 64 channels, growth 64.
  static ModelConfig base(Variant variant, int scale);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Channels arriving at block `b` (1-indexed).
int block_input_channels(const ModelConfig& cfg, int b);

struct IntraDenseBlock {
  ConvParams input_compression;          // 1x1 -> n_r
  std::vector<ConvParams> dense_layers;  // 3x3 -> n_g, each followed by ReLU
  ConvParams output_compression;         // 1x1 (n_r + L*n_g) -> n_r
};

struct Upsampler {
  std::vector<ConvParams> deconvs;  // DBDN family: one or two transposed convs
  std::optional<ConvParams> conv;   // DBDN+: 3x3 conv to a^2 * n_r channels
  int shuffle = 1;                  // DBDN+: pixel shuffle factor
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
  int rank;  // 4 for weights, 1 for biases
};

struct Network {
  ModelConfig config;
  ConvParams extraction;
  std::vector<IntraDenseBlock> blocks;
  ConvParams global_compression;
  Upsampler upsampler;
  ConvParams reconstruction;

  /// Every weight and bias in canonical build order.
  std::vector<NamedParameter> parameters() const;
  void set_requires_grad(bool on);
  void zero_grad();
  /// Deep copy; the copy shares no storage with this network.
  Network clone() const;
};

/// Normalizes an ablation config (WO_COMP always uses one block of 128
/// layers with growth 16).
ModelConfig ablation_config(const ModelConfig& cfg);

Network build_network(const ModelConfig& cfg, std::uint64_t seed);
/// Builds WO_INTER or WO_COMP after applying ablation_config().
Network build_ablation(const ModelConfig& cfg, std::uint64_t seed);

/// H_b = C_b + L_b^0 for one intra-dense block.
Tensor intra_block_forward(const IntraDenseBlock& block, const Tensor& input);
/// G = T + L0 where T compresses [H_1 .. H_B].
Tensor inter_forward(const Network& net, const Tensor& l0);
Tensor upsample(const Network& net, const Tensor& features);
/// Full LR -> SR pipeline. The output is not clamped.
Tensor forward(const Network& net, const Tensor& lr);

struct ParamBreakdown {
  std::size_t extraction = 0;
  std::vector<std::size_t> blocks;
  std::size_t global_compression = 0;
  std::size_t upsampler = 0;
  std::size_t reconstruction = 0;

  std::size_t total() const;
};

ParamBreakdown param_breakdown(const Network& net);
std::size_t count_params(const Network& net);

/// One conv site visited by the symbolic shape pass.
struct ShapeRecord {
  std::string layer;
  int expected_in = 0;  // what the layer's weights were built for
  int arriving_in = 0;  // what the wiring actually delivers
  Shape output;
};

/// Dry-run of the wiring on channel counts and spatial extents only.
/// Throws ShapeError at the first layer whose in_channels disagree with the
/// arriving channels.
std::vector<ShapeRecord> propagate_shapes(const Network& net, int lr_h, int lr_w);

}  // namespace dbdn
