#include "dbdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dbdn/ops.hpp"

namespace dbdn {

namespace ref = reference;

namespace {

using Rng = std::mt19937_64;

Tensor uniform(Shape s, Rng& rng, float lo, float hi) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(s.numel());
  for (float& x : v) x = d(rng);
  return Tensor(s, std::move(v));
}

/// Values with |x| in [0.1, 1]: keeps ReLU inputs clear of the kink.
Tensor away_from_zero(Shape s, Rng& rng) {
  std::uniform_real_distribution<float> mag(0.1f, 1.0f);
  std::bernoulli_distribution neg(0.5);
  std::vector<float> v(s.numel());
  for (float& x : v) x = neg(rng) ? -mag(rng) : mag(rng);
  return Tensor(s, std::move(v));
}

/// A target offset from `out` by at least 0.1 in a random direction, so an
/// L1 loss against it has no tie anywhere near the evaluation point.
Tensor offset_target(const Tensor& out, Rng& rng) {
  Tensor off = away_from_zero(out.shape(), rng);
  auto o = off.data_mut();
  auto d = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = d[i] + 0.5f * o[i];
  return off;
}

GradCheckResult merge(const std::string& name, const std::vector<GradCheckResult>& parts) {
  GradCheckResult r;
  r.name = name;
  for (const GradCheckResult& p : parts) {
    r.checked += p.checked;
    r.passed = r.passed && p.passed;
    if (p.max_rel_error >= r.max_rel_error) {
      r.max_rel_error = p.max_rel_error;
      r.worst = p.name + ": " + p.worst;
    }
  }
  return r;
}

ConvParams conv_params(const Tensor& w, const Tensor& b, int stride, int padding) {
  return ConvParams{w, b, stride, padding};
}

// Each case: L1(op(inputs), target) with the target fixed in advance.
struct OpCase {
  std::string label;
  std::vector<Tensor> inputs;
  std::function<Tensor(std::span<const Tensor>)> op;
  std::function<ref::DTensor(std::span<const ref::DTensor>)> ref_op;
};

GradCheckResult run_case(const OpCase& c, Rng& rng, const GradCheckOptions& opts) {
  const Tensor out = c.op(c.inputs);
  const Tensor target = offset_target(out, rng);
  const ref::DTensor target_d = ref::DTensor::from(target);
  auto op = c.op;
  auto ref_op = c.ref_op;
  return check_gradients(
      c.label, c.inputs,
      [op, target](std::span<const Tensor> in) { return l1_loss(op(in), target); },
      [ref_op, target_d](std::span<const ref::DTensor> in) {
        return ref::l1_loss(ref_op(in), target_d);
      },
      opts);
}

std::vector<OpCase> conv_cases(Rng& rng) {
  struct Geo { Shape x; int out, k, stride, pad; };
  const Geo geos[] = {
      {{2, 3, 5, 5}, 4, 3, 1, 1},
      {{1, 2, 5, 6}, 3, 3, 1, 0},
      {{1, 4, 5, 5}, 2, 3, 2, 1},
      {{2, 4, 4, 4}, 3, 1, 1, 0},
  };
  std::vector<OpCase> cases;
  for (const Geo& g : geos) {
    const int s = g.stride, p = g.pad;
    cases.push_back(
        {"x" + g.x.str() + " k" + std::to_string(g.k) + " s" + std::to_string(s) + " p" +
             std::to_string(p),
         {uniform(g.x, rng, -1, 1), uniform({g.out, g.x.c, g.k, g.k}, rng, -0.5f, 0.5f),
          uniform({g.out, 1, 1, 1}, rng, -0.5f, 0.5f)},
         [s, p](std::span<const Tensor> in) { return conv2d(in[0], conv_params(in[1], in[2], s, p)); },
         [s, p](std::span<const ref::DTensor> in) { return ref::conv2d(in[0], in[1], in[2], s, p); }});
  }
  return cases;
}

std::vector<OpCase> deconv_cases(Rng& rng) {
  struct Geo { Shape x; int out, k, stride, pad; };
  const Geo geos[] = {
      {{2, 3, 3, 3}, 2, 4, 2, 1},
      {{1, 2, 3, 3}, 3, 6, 2, 2},
      {{1, 2, 2, 2}, 2, 9, 3, 3},
      {{1, 4, 4, 3}, 3, 3, 1, 1},
  };
  std::vector<OpCase> cases;
  for (const Geo& g : geos) {
    const int s = g.stride, p = g.pad;
    cases.push_back(
        {"x" + g.x.str() + " k" + std::to_string(g.k) + " s" + std::to_string(s) + " p" +
             std::to_string(p),
         {uniform(g.x, rng, -1, 1), uniform({g.x.c, g.out, g.k, g.k}, rng, -0.5f, 0.5f),
          uniform({g.out, 1, 1, 1}, rng, -0.5f, 0.5f)},
         [s, p](std::span<const Tensor> in) {
           return conv2d_transpose(in[0], conv_params(in[1], in[2], s, p));
         },
         [s, p](std::span<const ref::DTensor> in) {
           return ref::conv2d_transpose(in[0], in[1], in[2], s, p);
         }});
  }
  return cases;
}

std::vector<OpCase> cases_for(const std::string& op, Rng& rng) {
  if (op == "conv2d") return conv_cases(rng);
  if (op == "conv2d_transpose") return deconv_cases(rng);
  if (op == "pixel_shuffle") {
    std::vector<OpCase> cases;
    for (auto [shape, a] : {std::pair{Shape{2, 4, 3, 3}, 2}, std::pair{Shape{1, 9, 2, 3}, 3}}) {
      cases.push_back({"x" + shape.str() + " a" + std::to_string(a),
                       {uniform(shape, rng, -1, 1)},
                       [a](std::span<const Tensor> in) { return pixel_shuffle(in[0], a); },
                       [a](std::span<const ref::DTensor> in) { return ref::pixel_shuffle(in[0], a); }});
    }
    return cases;
  }
  if (op == "concat_channels") {
    return {{"three inputs",
             {uniform({2, 1, 4, 3}, rng, -1, 1), uniform({2, 3, 4, 3}, rng, -1, 1),
              uniform({2, 2, 4, 3}, rng, -1, 1)},
             [](std::span<const Tensor> in) { return concat_channels(in); },
             [](std::span<const ref::DTensor> in) {
               return ref::concat_channels(std::vector<ref::DTensor>(in.begin(), in.end()));
             }}};
  }
  if (op == "slice_channels") {
    return {{"channels 1..3 of 4",
             {uniform({2, 4, 3, 5}, rng, -1, 1)},
             [](std::span<const Tensor> in) { return slice_channels(in[0], 1, 2); },
             [](std::span<const ref::DTensor> in) { return ref::slice_channels(in[0], 1, 2); }}};
  }
  if (op == "relu") {
    return {{"mixed signs",
             {away_from_zero({2, 3, 4, 4}, rng)},
             [](std::span<const Tensor> in) { return relu(in[0]); },
             [](std::span<const ref::DTensor> in) { return ref::relu(in[0]); }}};
  }
  if (op == "add") {
    return {{"two operands",
             {uniform({2, 3, 4, 4}, rng, -1, 1), uniform({2, 3, 4, 4}, rng, -1, 1)},
             [](std::span<const Tensor> in) { return add(in[0], in[1]); },
             [](std::span<const ref::DTensor> in) { return ref::add(in[0], in[1]); }},
            {"fan-out x + relu(x)",
             {away_from_zero({1, 2, 3, 4}, rng)},
             [](std::span<const Tensor> in) { return add(in[0], relu(in[0])); },
             [](std::span<const ref::DTensor> in) { return ref::add(in[0], ref::relu(in[0])); }}};
  }
  throw std::invalid_argument("unknown op '" + op + "'");
}

GradCheckResult check_l1(Rng& rng, const GradCheckOptions& opts) {
  // Gradients flow to both operands.
  const Tensor pred = uniform({2, 3, 4, 4}, rng, -1, 1);
  const Tensor target = offset_target(pred, rng);
  return check_gradients(
      "pred and target", {pred, target},
      [](std::span<const Tensor> in) { return l1_loss(in[0], in[1]); },
      [](std::span<const ref::DTensor> in) { return ref::l1_loss(in[0], in[1]); }, opts);
}

GradCheckResult check_sum(Rng& rng, const GradCheckOptions& opts) {
  return check_gradients(
      "x", {uniform({2, 3, 4, 5}, rng, -1, 1)},
      [](std::span<const Tensor> in) { return sum(in[0]); },
      [](std::span<const ref::DTensor> in) { return ref::sum(in[0]); }, opts);
}

std::string describe(std::size_t input, std::size_t index, double a, double n) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "input %zu [%zu] analytic %.6g numeric %.6g", input, index, a,
                n);
  return buf;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, std::vector<Tensor> inputs,
                                const FloatLoss& float_loss, const DoubleLoss& double_loss,
                                const GradCheckOptions& opts) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = float_loss(inputs);
    tape.backward(loss);
  }

  std::vector<ref::DTensor> point;
  point.reserve(inputs.size());
  for (const Tensor& t : inputs) point.push_back(ref::DTensor::from(t));

  GradCheckResult result;
  result.name = name;
  Rng rng(opts.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].numel();
    std::vector<float> analytic(n, 0.0f);
    if (inputs[k].has_grad()) {
      const auto g = inputs[k].grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (opts.max_checks_per_input > 0 && n > opts.max_checks_per_input) {
      const auto largest = static_cast<std::size_t>(
          std::max_element(analytic.begin(), analytic.end(),
                           [](float a, float b) { return std::fabs(a) < std::fabs(b); }) -
          analytic.begin());
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(opts.max_checks_per_input);
      if (std::find(indices.begin(), indices.end(), largest) == indices.end()) {
        indices.back() = largest;
      }
    }
    for (std::size_t i : indices) {
      double& x = point[k].data[i];
      const double saved = x;
      x = saved + opts.eps;
      const double plus = double_loss(point);
      x = saved - opts.eps;
      const double minus = double_loss(point);
      x = saved;
      const double numeric = (plus - minus) / (2.0 * opts.eps);
      const double a = analytic[i];
      const double scale = std::max(std::fabs(a), std::fabs(numeric));
      if (scale < opts.floor) continue;
      const double rel = std::fabs(a - numeric) / scale;
      ++result.checked;
      if (rel >= result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = describe(k, i, a, numeric);
      }
    }
  }
  result.passed = result.max_rel_error < opts.tolerance;
  for (Tensor& t : inputs) t.set_requires_grad(false);
  return result;
}

const std::vector<std::string>& gradcheck_op_names() {
  static const std::vector<std::string> names{
      "conv2d", "conv2d_transpose", "pixel_shuffle", "concat_channels", "slice_channels",
      "relu",   "add",              "l1_loss",       "sum"};
  return names;
}

GradCheckResult check_op(const std::string& op, std::uint64_t seed, const GradCheckOptions& opts) {
  Rng rng(seed);
  if (op == "l1_loss") return merge(op, {check_l1(rng, opts)});
  if (op == "sum") return merge(op, {check_sum(rng, opts)});
  std::vector<GradCheckResult> parts;
  for (const OpCase& c : cases_for(op, rng)) parts.push_back(run_case(c, rng, opts));
  return merge(op, parts);
}

GradCheckOptions network_gradcheck_options() {
  GradCheckOptions o;
  o.eps = 1e-6;
  o.max_checks_per_input = 48;
  return o;
}

ModelConfig gradcheck_network_config() {
  ModelConfig cfg;
  cfg.blocks = 2;
  cfg.layers = 2;
  cfg.n_r = 8;
  cfg.n_g = 8;
  cfg.scale = 2;
  return cfg;
}

GradCheckResult check_network(const ModelConfig& cfg, std::uint64_t seed,
                              const GradCheckOptions& opts) {
  Network net = build_network(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int side = 6;
  const Tensor lr = uniform({1, 3, side, side}, rng, 0, 1);
  const Tensor hr = uniform({1, 3, side * cfg.scale, side * cfg.scale}, rng, 0, 1);
  const ref::DTensor hr_d = ref::DTensor::from(hr);

  std::vector<Tensor> inputs{lr};
  for (const NamedParameter& p : net.parameters()) inputs.push_back(p.tensor);
  GradCheckOptions o = opts;
  o.seed = seed;
  GradCheckResult r = check_gradients(
      "network",
      inputs,
      [&net, hr](std::span<const Tensor> in) { return l1_loss(forward(net, in[0]), hr); },
      [cfg, hr_d](std::span<const ref::DTensor> in) {
        return ref::l1_loss(ref::forward(cfg, in.subspan(1), in[0]), hr_d);
      },
      o);
  r.name = std::string("network ") + std::string(variant_name(cfg.variant));
  return r;
}

}  // namespace dbdn
