#pragma once

// Internal dense kernels shared by the conv ops. Not part of the public API.

#include <cstddef>

namespace dbdn::kernels {

/// C(m x n) = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, const float* b, float beta, float* c);

struct Geometry {
  int channels;
  int height;
  int width;
  int kernel_h;
  int kernel_w;
  int stride;
  int padding;
  int out_h;
  int out_w;
};

/// Unfolds an image (channels, height, width) into columns
/// (channels * kh * kw, out_h * out_w). Out-of-image taps read zero.
void im2col(const float* image, const Geometry& g, float* columns);

/// Adjoint of im2col: scatters columns back and accumulates into `image`.
void col2im(const float* columns, const Geometry& g, float* image);

}  // namespace dbdn::kernels
