#include "kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cstring>

namespace dbdn::kernels {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, const float* b, float beta, float* c) {
  const int lda = trans_a ? m : k;
  const int ldb = trans_b ? k : n;
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, n);
}

void im2col(const float* image, const Geometry& g, float* columns) {
  const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const float* src = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        float* dst = columns;
        columns += out_plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          float* row = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(row, row + g.out_w, 0.0f);
            continue;
          }
          const float* src_row = src + static_cast<std::size_t>(iy) * g.width;
          if (g.stride == 1) {
            // Valid ox range: 0 <= ox - pad + kj < width.
            const int lo = std::clamp(g.padding - kj, 0, g.out_w);
            const int hi = std::clamp(g.width + g.padding - kj, lo, g.out_w);
            std::fill(row, row + lo, 0.0f);
            if (hi > lo) {
              std::memcpy(row + lo, src_row + lo - g.padding + kj,
                          sizeof(float) * static_cast<std::size_t>(hi - lo));
            }
            std::fill(row + hi, row + g.out_w, 0.0f);
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.padding + kj;
              row[ox] = (ix >= 0 && ix < g.width) ? src_row[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* columns, const Geometry& g, float* image) {
  const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    float* dst = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        const float* src = columns;
        columns += out_plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki;
          if (iy < 0 || iy >= g.height) continue;
          const float* row = src + static_cast<std::size_t>(oy) * g.out_w;
          float* dst_row = dst + static_cast<std::size_t>(iy) * g.width;
          if (g.stride == 1) {
            const int lo = std::clamp(g.padding - kj, 0, g.out_w);
            const int hi = std::clamp(g.width + g.padding - kj, lo, g.out_w);
            const int shift = kj - g.padding;
            for (int ox = lo; ox < hi; ++ox) dst_row[ox + shift] += row[ox];
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.padding + kj;
              if (ix >= 0 && ix < g.width) dst_row[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace dbdn::kernels
