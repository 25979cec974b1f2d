#pragma once

// Central finite-difference checks of tape gradients against the
// double-precision reference kernels.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dbdn/model.hpp"
#include "dbdn/reference.hpp"
#include "dbdn/tensor.hpp"

namespace dbdn {

struct GradCheckOptions {
  double eps = 1e-3;
  double tolerance = 1e-3;
  /// Elements whose analytic and numeric magnitudes are both below this are
  /// not compared.
  double floor = 1e-6;
  /// 0 checks every element; otherwise a seeded random subset per input
  /// (the largest-gradient element is always included).
  std::size_t max_checks_per_input = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
  std::string worst;  // location of the largest error
};

/// Builds a scalar loss from the inputs with the float ops (recorded).
using FloatLoss = std::function<Tensor(std::span<const Tensor>)>;
/// The same loss evaluated in double precision.
using DoubleLoss = std::function<double(std::span<const reference::DTensor>)>;

/// Differentiates `float_loss` through a fresh tape and compares every
/// input gradient element with (L(x+eps) - L(x-eps)) / 2eps from `double_loss`.
GradCheckResult check_gradients(const std::string& name, std::vector<Tensor> inputs,
                                const FloatLoss& float_loss, const DoubleLoss& double_loss,
                                const GradCheckOptions& opts = {});

/// conv2d, conv2d_transpose, pixel_shuffle, concat_channels, slice_channels,
/// relu, add, l1_loss, sum.
const std::vector<std::string>& gradcheck_op_names();

/// Checks one op over a few small geometries (dims <= 6, channels <= 4).
/// Throws std::invalid_argument for an unknown op name.
GradCheckResult check_op(const std::string& op, std::uint64_t seed = 1,
                         const GradCheckOptions& opts = {});

/// Options suited to a whole network: a small step so no ReLU kink is
/// crossed, and a sampled subset of each parameter tensor.
GradCheckOptions network_gradcheck_options();

/// End-to-end check of input and parameter gradients of a randomly
/// initialized network on a 6x6 LR input with an L1 loss.
GradCheckResult check_network(const ModelConfig& cfg, std::uint64_t seed,
                              const GradCheckOptions& opts = network_gradcheck_options());

/// The tiny configuration used by the default suite: B=2, L=2, n_r=n_g=8, x2.
ModelConfig gradcheck_network_config();

}  // namespace dbdn
