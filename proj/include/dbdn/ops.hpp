#pragma once

#include <span>
#include <vector>

#include "dbdn/tensor.hpp"

namespace dbdn {

/// Weights and bias of one convolution or transposed convolution.
///
/// For conv2d the weight is laid out (out, in, kh, kw); for conv2d_transpose
/// it is (in, out, kh, kw), so a transposed layer and the conv it is the
/// adjoint of read the same buffer the same way. The bias is stored as an
/// (out, 1, 1, 1) tensor and is logically rank 1.
struct ConvParams {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;

  int kernel_h() const { return weight.shape().h; }
  int kernel_w() const { return weight.shape().w; }
  /// Channel counts as seen by conv2d.
  int conv_out_channels() const { return weight.shape().n; }
  int conv_in_channels() const { return weight.shape().c; }
  std::size_t numel() const { return weight.numel() + bias.numel(); }

  /// Zero-initialized (out, in, k, k) parameters for conv2d.
  static ConvParams conv(int in, int out, int kernel, int stride, int padding);
  /// Zero-initialized (in, out, k, k) parameters for conv2d_transpose.
  static ConvParams transposed(int in, int out, int kernel, int stride,
                               int padding);
};

/// Output extent of a convolution along one axis; throws on a negative or
/// non-integral extent.
int conv_output_extent(int in, int kernel, int stride, int padding);
/// Output extent of a transposed convolution: (in - 1) * stride - 2 * pad + k.
int conv_transpose_output_extent(int in, int kernel, int stride, int padding);

Tensor conv2d(const Tensor& x, const ConvParams& p);
Tensor conv2d_transpose(const Tensor& x, const ConvParams& p);

/// Sub-pixel rearrangement: (n, c*a*a, h, w) -> (n, c, a*h, a*w), where output
/// (ch, a*i + di, a*j + dj) comes from input channel ch*a*a + di*a + dj.
Tensor pixel_shuffle(const Tensor& x, int scale);

/// Channel-wise concatenation in argument order.
Tensor concat_channels(std::span<const Tensor> xs);
Tensor concat_channels(std::initializer_list<Tensor> xs);
/// Channels [begin, begin + count) of x.
Tensor slice_channels(const Tensor& x, int begin, int count);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& x, const Tensor& y);

/// Mean absolute error as a (1,1,1,1) tensor. The sub-gradient at a tie is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);
/// Sum of all elements as a (1,1,1,1) tensor.
Tensor sum(const Tensor& x);

}  // namespace dbdn
