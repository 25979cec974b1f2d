#include "dbdn/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dbdn {

namespace {

constexpr int kImageChannels = 3;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void init_uniform(ConvParams& p, int fan_in, std::mt19937_64& rng) {
  const float bound = static_cast<float>(std::sqrt(1.0 / fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : p.weight.data_mut()) v = dist(rng);
  std::fill(p.bias.data_mut().begin(), p.bias.data_mut().end(), 0.0f);
}

ConvParams make_conv(int in, int out, int kernel, int padding, std::mt19937_64& rng) {
  ConvParams p = ConvParams::conv(in, out, kernel, 1, padding);
  init_uniform(p, in * kernel * kernel, rng);
  return p;
}

ConvParams make_deconv(int in, int out, int kernel, int stride, int padding,
                       std::mt19937_64& rng) {
  ConvParams p = ConvParams::transposed(in, out, kernel, stride, padding);
  // Each output pixel sees in * (k / stride)^2 taps.
  const int taps = kernel / stride;
  init_uniform(p, std::max(1, in * taps * taps), rng);
  return p;
}

ConvParams clone_conv(const ConvParams& p) {
  return {p.weight.clone(), p.bias.clone(), p.stride, p.padding};
}

void append(std::vector<NamedParameter>& out, const std::string& name,
            const ConvParams& p) {
  out.push_back({name + ".weight", p.weight, 4});
  out.push_back({name + ".bias", p.bias, 1});
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kDbdn: return "dbdn";
    case Variant::kDbdnPlus: return "dbdn+";
    case Variant::kWithoutInter: return "wo_inter";
    case Variant::kWithoutComp: return "wo_comp";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  const std::string s = lower(name);
  if (s == "dbdn") return Variant::kDbdn;
  if (s == "dbdn+" || s == "dbdn_plus" || s == "dbdnplus") return Variant::kDbdnPlus;
  if (s == "wo_inter" || s == "dbdn-w/o-inter") return Variant::kWithoutInter;
  if (s == "wo_comp" || s == "dbdn-w/o-comp") return Variant::kWithoutComp;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (scale < 2 || scale > 4) {
    throw std::invalid_argument("scale must be 2, 3 or 4, got " + std::to_string(scale));
  }
  if (blocks < 1 || layers < 1 || n_r < 1 || n_g < 1) {
    throw std::invalid_argument("blocks, layers, n_r and n_g must all be >= 1");
  }
  if (static_cast<std::uint32_t>(variant) > 3) {
    throw std::invalid_argument("invalid variant tag");
  }
}

ModelConfig ModelConfig::base(Variant variant, int scale) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.scale = scale;
  return cfg;
}

int block_input_channels(const ModelConfig& cfg, int b) {
  if (b <= 1 || cfg.variant == Variant::kWithoutInter) return cfg.n_r;
  return cfg.n_r * (b - 1) + (cfg.prepend_extraction ? cfg.n_r : 0);
}

ModelConfig ablation_config(const ModelConfig& cfg) {
  ModelConfig out = cfg;
  if (cfg.variant == Variant::kWithoutComp) {
    out.blocks = 1;
    out.layers = 128;
    out.n_g = 16;
  } else if (cfg.variant != Variant::kWithoutInter) {
    throw std::invalid_argument("build_ablation: variant must be wo_inter or wo_comp");
  }
  return out;
}

Network build_network(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Network net;
  net.config = cfg;
  net.extraction = make_conv(kImageChannels, cfg.n_r, 3, 1, rng);
  for (int b = 1; b <= cfg.blocks; ++b) {
    IntraDenseBlock block;
    block.input_compression = make_conv(block_input_channels(cfg, b), cfg.n_r, 1, 0, rng);
    for (int i = 1; i <= cfg.layers; ++i) {
      block.dense_layers.push_back(make_conv(cfg.n_r + (i - 1) * cfg.n_g, cfg.n_g, 3, 1, rng));
    }
    block.output_compression = make_conv(cfg.n_r + cfg.layers * cfg.n_g, cfg.n_r, 1, 0, rng);
    net.blocks.push_back(std::move(block));
  }
  net.global_compression = make_conv(cfg.blocks * cfg.n_r, cfg.n_r, 1, 0, rng);
  if (cfg.variant == Variant::kDbdnPlus) {
    net.upsampler.conv = make_conv(cfg.n_r, cfg.scale * cfg.scale * cfg.n_r, 3, 1, rng);
    net.upsampler.shuffle = cfg.scale;
  } else if (cfg.scale == 3) {
    net.upsampler.deconvs.push_back(make_deconv(cfg.n_r, cfg.n_r, 9, 3, 3, rng));
  } else {
    const int stages = cfg.scale == 4 ? 2 : 1;
    for (int s = 0; s < stages; ++s) {
      net.upsampler.deconvs.push_back(make_deconv(cfg.n_r, cfg.n_r, 6, 2, 2, rng));
    }
  }
  net.reconstruction = make_conv(cfg.n_r, kImageChannels, 3, 1, rng);
  return net;
}

Network build_ablation(const ModelConfig& cfg, std::uint64_t seed) {
  return build_network(ablation_config(cfg), seed);
}

std::vector<NamedParameter> Network::parameters() const {
  std::vector<NamedParameter> out;
  append(out, "extraction", extraction);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string prefix = "blocks." + std::to_string(b + 1);
    append(out, prefix + ".input_compression", blocks[b].input_compression);
    for (std::size_t i = 0; i < blocks[b].dense_layers.size(); ++i) {
      append(out, prefix + ".dense." + std::to_string(i + 1), blocks[b].dense_layers[i]);
    }
    append(out, prefix + ".output_compression", blocks[b].output_compression);
  }
  append(out, "global_compression", global_compression);
  for (std::size_t k = 0; k < upsampler.deconvs.size(); ++k) {
    append(out, "upsampler.deconv." + std::to_string(k + 1), upsampler.deconvs[k]);
  }
  if (upsampler.conv) append(out, "upsampler.conv", *upsampler.conv);
  append(out, "reconstruction", reconstruction);
  return out;
}

void Network::set_requires_grad(bool on) {
  for (NamedParameter& p : parameters()) p.tensor.set_requires_grad(on);
}

void Network::zero_grad() {
  for (NamedParameter& p : parameters()) p.tensor.zero_grad();
}

Network Network::clone() const {
  Network out;
  out.config = config;
  out.extraction = clone_conv(extraction);
  for (const IntraDenseBlock& b : blocks) {
    IntraDenseBlock copy;
    copy.input_compression = clone_conv(b.input_compression);
    for (const ConvParams& d : b.dense_layers) copy.dense_layers.push_back(clone_conv(d));
    copy.output_compression = clone_conv(b.output_compression);
    out.blocks.push_back(std::move(copy));
  }
  out.global_compression = clone_conv(global_compression);
  for (const ConvParams& d : upsampler.deconvs) out.upsampler.deconvs.push_back(clone_conv(d));
  if (upsampler.conv) out.upsampler.conv = clone_conv(*upsampler.conv);
  out.upsampler.shuffle = upsampler.shuffle;
  out.reconstruction = clone_conv(reconstruction);
  return out;
}

Tensor intra_block_forward(const IntraDenseBlock& block, const Tensor& input) {
  if (input.shape().c != block.input_compression.conv_in_channels()) {
    throw ShapeError("intra block: input has " + std::to_string(input.shape().c) +
                     " channels, input compression expects " +
                     std::to_string(block.input_compression.conv_in_channels()));
  }
  const Tensor l0 = conv2d(input, block.input_compression);
  std::vector<Tensor> features{l0};
  features.reserve(block.dense_layers.size() + 1);
  for (const ConvParams& layer : block.dense_layers) {
    const Tensor stacked = features.size() == 1 ? features.front() : concat_channels(features);
    features.push_back(relu(conv2d(stacked, layer)));
  }
  const Tensor compressed = conv2d(concat_channels(features), block.output_compression);
  return add(compressed, l0);
}

Tensor inter_forward(const Network& net, const Tensor& l0) {
  const ModelConfig& cfg = net.config;
  std::vector<Tensor> outputs;
  outputs.reserve(net.blocks.size());
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    Tensor input;
    if (b == 0) {
      input = l0;
    } else if (cfg.variant == Variant::kWithoutInter) {
      input = outputs.back();
    } else if (cfg.prepend_extraction) {
      std::vector<Tensor> parts{l0};
      parts.insert(parts.end(), outputs.begin(), outputs.end());
      input = concat_channels(parts);
    } else {
      input = outputs.size() == 1 ? outputs.front() : concat_channels(outputs);
    }
    outputs.push_back(intra_block_forward(net.blocks[b], input));
  }
  const Tensor all = outputs.size() == 1 ? outputs.front() : concat_channels(outputs);
  const Tensor t = conv2d(all, net.global_compression);
  return add(t, l0);
}

Tensor upsample(const Network& net, const Tensor& features) {
  Tensor x = features;
  if (net.upsampler.conv) {
    return pixel_shuffle(conv2d(x, *net.upsampler.conv), net.upsampler.shuffle);
  }
  for (const ConvParams& d : net.upsampler.deconvs) x = conv2d_transpose(x, d);
  return x;
}

Tensor forward(const Network& net, const Tensor& lr) {
  if (lr.shape().c != kImageChannels) {
    throw ShapeError("forward: expected a 3-channel input, got " + lr.shape().str());
  }
  const Tensor l0 = conv2d(lr, net.extraction);
  const Tensor g = inter_forward(net, l0);
  return conv2d(upsample(net, g), net.reconstruction);
}

std::size_t ParamBreakdown::total() const {
  std::size_t t = extraction + global_compression + upsampler + reconstruction;
  for (std::size_t b : blocks) t += b;
  return t;
}

ParamBreakdown param_breakdown(const Network& net) {
  ParamBreakdown out;
  out.extraction = net.extraction.numel();
  for (const IntraDenseBlock& b : net.blocks) {
    std::size_t n = b.input_compression.numel() + b.output_compression.numel();
    for (const ConvParams& d : b.dense_layers) n += d.numel();
    out.blocks.push_back(n);
  }
  out.global_compression = net.global_compression.numel();
  for (const ConvParams& d : net.upsampler.deconvs) out.upsampler += d.numel();
  if (net.upsampler.conv) out.upsampler += net.upsampler.conv->numel();
  out.reconstruction = net.reconstruction.numel();
  return out;
}

std::size_t count_params(const Network& net) {
  std::size_t total = 0;
  for (const NamedParameter& p : net.parameters()) total += p.tensor.numel();
  return total;
}

namespace {

struct SymbolicTensor {
  int c, h, w;
};

SymbolicTensor symbolic_conv(std::vector<ShapeRecord>& log, const std::string& name,
                             const ConvParams& p, SymbolicTensor in, bool transposed) {
  const Shape ws = p.weight.shape();
  const int expected = transposed ? ws.n : ws.c;
  const int out_c = transposed ? ws.c : ws.n;
  if (expected != in.c) {
    throw ShapeError(name + ": built for " + std::to_string(expected) +
                     " input channels but " + std::to_string(in.c) + " arrive");
  }
  SymbolicTensor out{out_c, 0, 0};
  if (transposed) {
    out.h = conv_transpose_output_extent(in.h, ws.h, p.stride, p.padding);
    out.w = conv_transpose_output_extent(in.w, ws.w, p.stride, p.padding);
  } else {
    out.h = conv_output_extent(in.h, ws.h, p.stride, p.padding);
    out.w = conv_output_extent(in.w, ws.w, p.stride, p.padding);
  }
  log.push_back({name, expected, in.c, Shape{1, out.c, out.h, out.w}});
  return out;
}

}  // namespace

std::vector<ShapeRecord> propagate_shapes(const Network& net, int lr_h, int lr_w) {
  const ModelConfig& cfg = net.config;
  std::vector<ShapeRecord> log;
  const SymbolicTensor image{kImageChannels, lr_h, lr_w};
  const SymbolicTensor l0 = symbolic_conv(log, "extraction", net.extraction, image, false);

  std::vector<SymbolicTensor> block_outputs;
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const std::string prefix = "blocks." + std::to_string(b + 1);
    SymbolicTensor in = l0;
    if (b > 0) {
      if (cfg.variant == Variant::kWithoutInter) {
        in = block_outputs.back();
      } else {
        in.c = cfg.prepend_extraction ? l0.c : 0;
        for (const SymbolicTensor& h : block_outputs) in.c += h.c;
      }
    }
    const IntraDenseBlock& block = net.blocks[b];
    const SymbolicTensor lb0 =
        symbolic_conv(log, prefix + ".input_compression", block.input_compression, in, false);
    SymbolicTensor running = lb0;
    for (std::size_t i = 0; i < block.dense_layers.size(); ++i) {
      const SymbolicTensor out = symbolic_conv(log, prefix + ".dense." + std::to_string(i + 1),
                                               block.dense_layers[i], running, false);
      running.c += out.c;
    }
    SymbolicTensor h = symbolic_conv(log, prefix + ".output_compression",
                                     block.output_compression, running, false);
    if (h.c != lb0.c) throw ShapeError(prefix + ": local skip adds mismatched channels");
    block_outputs.push_back(h);
  }
  SymbolicTensor all = block_outputs.front();
  all.c = 0;
  for (const SymbolicTensor& h : block_outputs) all.c += h.c;
  SymbolicTensor g = symbolic_conv(log, "global_compression", net.global_compression, all, false);
  if (g.c != l0.c) throw ShapeError("global skip adds mismatched channels");

  SymbolicTensor up = g;
  for (std::size_t k = 0; k < net.upsampler.deconvs.size(); ++k) {
    up = symbolic_conv(log, "upsampler.deconv." + std::to_string(k + 1),
                       net.upsampler.deconvs[k], up, true);
  }
  if (net.upsampler.conv) {
    up = symbolic_conv(log, "upsampler.conv", *net.upsampler.conv, up, false);
    const int a = net.upsampler.shuffle;
    if (up.c % (a * a) != 0) throw ShapeError("pixel shuffle: channels not divisible");
    up = {up.c / (a * a), up.h * a, up.w * a};
  }
  symbolic_conv(log, "reconstruction", net.reconstruction, up, false);
  return log;
}

}  // namespace dbdn
