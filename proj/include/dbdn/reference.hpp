#pragma once

// Double-precision direct-loop kernels. They share no code with the float
// ops (no im2col, no BLAS) and serve as the numerical oracle for gradient
// checks.

#include <span>
#include <vector>

#include "dbdn/model.hpp"
#include "dbdn/tensor.hpp"

namespace dbdn::reference {

struct DTensor {
  Shape shape;
  std::vector<double> data;

  DTensor() = default;
  explicit DTensor(Shape s, double fill = 0.0) : shape(s), data(s.numel(), fill) {}
  static DTensor from(const Tensor& t);
  Tensor to_float() const;

  double& at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  double at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
};

/// weight (out, in, kh, kw), bias (out).
DTensor conv2d(const DTensor& x, const DTensor& weight, const DTensor& bias, int stride,
               int padding);
/// weight (in, out, kh, kw), bias (out).
DTensor conv2d_transpose(const DTensor& x, const DTensor& weight, const DTensor& bias,
                         int stride, int padding);
DTensor pixel_shuffle(const DTensor& x, int scale);
DTensor concat_channels(const std::vector<DTensor>& xs);
DTensor slice_channels(const DTensor& x, int begin, int count);
DTensor relu(const DTensor& x);
DTensor add(const DTensor& x, const DTensor& y);
double l1_loss(const DTensor& pred, const DTensor& target);
double sum(const DTensor& x);

/// Network forward from parameters listed in Network::parameters() order.
DTensor forward(const ModelConfig& cfg, std::span<const DTensor> params, const DTensor& lr);

}  // namespace dbdn::reference
