#include "dbdn/ops.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "kernels.hpp"

namespace dbdn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void accumulate_bias_grad(const float* gy, int batch, int channels,
                          std::size_t plane, float* gb) {
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const float* p = gy + (static_cast<std::size_t>(n) * channels + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      gb[c] += static_cast<float>(acc);
    }
  }
}

void add_bias(float* y, const float* bias, int batch, int channels,
              std::size_t plane) {
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      float* p = y + (static_cast<std::size_t>(n) * channels + c) * plane;
      const float b = bias[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
}

}  // namespace

ConvParams ConvParams::conv(int in, int out, int kernel, int stride,
                            int padding) {
  return {Tensor({out, in, kernel, kernel}), Tensor({out, 1, 1, 1}), stride,
          padding};
}

ConvParams ConvParams::transposed(int in, int out, int kernel, int stride,
                                  int padding) {
  return {Tensor({in, out, kernel, kernel}), Tensor({out, 1, 1, 1}), stride,
          padding};
}

int conv_output_extent(int in, int kernel, int stride, int padding) {
  require(stride >= 1 && padding >= 0, "conv: stride must be >= 1, padding >= 0");
  const int span = in + 2 * padding - kernel;
  require(span >= 0, "conv: kernel " + std::to_string(kernel) +
                         " larger than padded input " +
                         std::to_string(in + 2 * padding));
  require(span % stride == 0, "conv: (in + 2*pad - k) = " + std::to_string(span) +
                                  " not divisible by stride " +
                                  std::to_string(stride));
  return span / stride + 1;
}

int conv_transpose_output_extent(int in, int kernel, int stride, int padding) {
  require(stride >= 1 && padding >= 0,
          "conv_transpose: stride must be >= 1, padding >= 0");
  const int out = (in - 1) * stride - 2 * padding + kernel;
  require(out >= 1, "conv_transpose: non-positive output extent " +
                        std::to_string(out));
  return out;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  const Shape xs = x.shape();
  const Shape ws = p.weight.shape();
  require(xs.c == ws.c, "conv2d: input has " + std::to_string(xs.c) +
                            " channels, weight expects " + std::to_string(ws.c));
  require(p.bias.numel() == static_cast<std::size_t>(ws.n),
          "conv2d: bias length does not match out_channels");
  const int oh = conv_output_extent(xs.h, ws.h, p.stride, p.padding);
  const int ow = conv_output_extent(xs.w, ws.w, p.stride, p.padding);
  const kernels::Geometry g{xs.c, xs.h, xs.w, ws.h, ws.w, p.stride, p.padding, oh, ow};
  const bool pointwise = ws.h == 1 && ws.w == 1 && p.stride == 1 && p.padding == 0;
  const int patch = ws.c * ws.h * ws.w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

  Tensor y({xs.n, ws.n, oh, ow});
  float* yd = y.data_mut().data();
  const float* xd = x.data().data();
  const float* wd = p.weight.data().data();
  std::vector<float> columns(pointwise ? 0 : static_cast<std::size_t>(patch) * out_plane);
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = xd + static_cast<std::size_t>(n) * xs.c * xs.plane();
    const float* cols = xn;
    if (!pointwise) {
      kernels::im2col(xn, g, columns.data());
      cols = columns.data();
    }
    kernels::gemm(false, false, ws.n, static_cast<int>(out_plane), patch, 1.0f,
                  wd, cols, 0.0f, yd + static_cast<std::size_t>(n) * ws.n * out_plane);
  }
  add_bias(yd, p.bias.data().data(), xs.n, ws.n, out_plane);

  if (needs_recording({&x, &p.weight, &p.bias})) {
    Tape::active()->record(
        "conv2d", {x, p.weight, p.bias}, y,
        [x, w = p.weight, b = p.bias, y, g, pointwise, patch, out_plane]() mutable {
          const Shape xs = x.shape();
          const int out_c = w.shape().n;
          const float* gy = y.grad().data();
          if (b.requires_grad()) {
            accumulate_bias_grad(gy, xs.n, out_c, out_plane, b.grad_mut().data());
          }
          std::vector<float> columns(pointwise ? 0 : static_cast<std::size_t>(patch) * out_plane);
          for (int n = 0; n < xs.n; ++n) {
            const float* gyn = gy + static_cast<std::size_t>(n) * out_c * out_plane;
            const std::size_t x_off = static_cast<std::size_t>(n) * xs.c * xs.plane();
            if (w.requires_grad()) {
              const float* cols = x.data().data() + x_off;
              if (!pointwise) {
                kernels::im2col(cols, g, columns.data());
                cols = columns.data();
              }
              kernels::gemm(false, true, out_c, patch, static_cast<int>(out_plane),
                            1.0f, gyn, cols, 1.0f, w.grad_mut().data());
            }
            if (x.requires_grad()) {
              float* gx = x.grad_mut().data() + x_off;
              if (pointwise) {
                kernels::gemm(true, false, patch, static_cast<int>(out_plane), out_c,
                              1.0f, w.data().data(), gyn, 1.0f, gx);
              } else {
                kernels::gemm(true, false, patch, static_cast<int>(out_plane), out_c,
                              1.0f, w.data().data(), gyn, 0.0f, columns.data());
                kernels::col2im(columns.data(), g, gx);
              }
            }
          }
        });
  }
  return y;
}

Tensor conv2d_transpose(const Tensor& x, const ConvParams& p) {
  const Shape xs = x.shape();
  const Shape ws = p.weight.shape();  // (in, out, kh, kw)
  require(xs.c == ws.n, "conv2d_transpose: input has " + std::to_string(xs.c) +
                            " channels, weight expects " + std::to_string(ws.n));
  require(p.bias.numel() == static_cast<std::size_t>(ws.c),
          "conv2d_transpose: bias length does not match out_channels");
  const int oh = conv_transpose_output_extent(xs.h, ws.h, p.stride, p.padding);
  const int ow = conv_transpose_output_extent(xs.w, ws.w, p.stride, p.padding);
  // The output image is the "input" of the conv this op is the adjoint of.
  const kernels::Geometry g{ws.c, oh, ow, ws.h, ws.w, p.stride, p.padding, xs.h, xs.w};
  const int patch = ws.c * ws.h * ws.w;
  const std::size_t in_plane = xs.plane();
  const std::size_t out_size = static_cast<std::size_t>(ws.c) * oh * ow;

  Tensor y({xs.n, ws.c, oh, ow});
  float* yd = y.data_mut().data();
  std::vector<float> columns(static_cast<std::size_t>(patch) * in_plane);
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = x.data().data() + static_cast<std::size_t>(n) * xs.c * in_plane;
    kernels::gemm(true, false, patch, static_cast<int>(in_plane), xs.c, 1.0f,
                  p.weight.data().data(), xn, 0.0f, columns.data());
    kernels::col2im(columns.data(), g, yd + static_cast<std::size_t>(n) * out_size);
  }
  add_bias(yd, p.bias.data().data(), xs.n, ws.c, static_cast<std::size_t>(oh) * ow);

  if (needs_recording({&x, &p.weight, &p.bias})) {
    Tape::active()->record(
        "conv2d_transpose", {x, p.weight, p.bias}, y,
        [x, w = p.weight, b = p.bias, y, g, patch, in_plane, out_size]() mutable {
          const Shape xs = x.shape();
          const float* gy = y.grad().data();
          if (b.requires_grad()) {
            accumulate_bias_grad(gy, xs.n, g.channels,
                                 static_cast<std::size_t>(g.height) * g.width,
                                 b.grad_mut().data());
          }
          if (!x.requires_grad() && !w.requires_grad()) return;
          std::vector<float> columns(static_cast<std::size_t>(patch) * in_plane);
          for (int n = 0; n < xs.n; ++n) {
            kernels::im2col(gy + static_cast<std::size_t>(n) * out_size, g, columns.data());
            const std::size_t x_off = static_cast<std::size_t>(n) * xs.c * in_plane;
            if (x.requires_grad()) {
              kernels::gemm(false, false, xs.c, static_cast<int>(in_plane), patch, 1.0f,
                            w.data().data(), columns.data(), 1.0f,
                            x.grad_mut().data() + x_off);
            }
            if (w.requires_grad()) {
              kernels::gemm(false, true, xs.c, patch, static_cast<int>(in_plane), 1.0f,
                            x.data().data() + x_off, columns.data(), 1.0f,
                            w.grad_mut().data());
            }
          }
        });
  }
  return y;
}

Tensor pixel_shuffle(const Tensor& x, int scale) {
  const Shape xs = x.shape();
  require(scale >= 1, "pixel_shuffle: scale must be >= 1");
  const int a2 = scale * scale;
  require(xs.c % a2 == 0, "pixel_shuffle: " + std::to_string(xs.c) +
                              " channels not divisible by " + std::to_string(a2));
  const Shape ys{xs.n, xs.c / a2, xs.h * scale, xs.w * scale};
  // index[k] = flat input offset feeding flat output offset k.
  auto source_index = [xs, ys, scale, a2](std::size_t k) {
    const std::size_t ow = ys.w, oh = ys.h;
    const std::size_t ox = k % ow;
    const std::size_t oy = (k / ow) % oh;
    const std::size_t c = (k / (ow * oh)) % ys.c;
    const std::size_t n = k / (ow * oh * ys.c);
    const std::size_t ic = c * a2 + (oy % scale) * scale + (ox % scale);
    return ((n * xs.c + ic) * xs.h + oy / scale) * xs.w + ox / scale;
  };
  Tensor y(ys);
  auto yd = y.data_mut();
  auto xd = x.data();
  for (std::size_t k = 0; k < yd.size(); ++k) yd[k] = xd[source_index(k)];

  if (needs_recording({&x})) {
    Tape::active()->record("pixel_shuffle", {x}, y, [x, y, source_index]() mutable {
      auto gy = y.grad();
      auto gx = x.grad_mut();
      for (std::size_t k = 0; k < gy.size(); ++k) gx[source_index(k)] += gy[k];
    });
  }
  return y;
}

Tensor concat_channels(std::initializer_list<Tensor> xs) {
  return concat_channels(std::span<const Tensor>(xs.begin(), xs.size()));
}

Tensor concat_channels(std::span<const Tensor> xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  const Shape first = xs.front().shape();
  int channels = 0;
  for (const Tensor& t : xs) {
    const Shape s = t.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w,
            "concat_channels: batch/spatial mismatch " + s.str() + " vs " + first.str());
    channels += s.c;
  }
  const Shape ys{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  Tensor y(ys);
  float* yd = y.data_mut().data();
  for (int n = 0; n < first.n; ++n) {
    float* dst = yd + static_cast<std::size_t>(n) * channels * plane;
    for (const Tensor& t : xs) {
      const std::size_t len = static_cast<std::size_t>(t.shape().c) * plane;
      std::memcpy(dst, t.data().data() + n * len, len * sizeof(float));
      dst += len;
    }
  }
  if (needs_recording(xs)) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    Tape::active()->record("concat_channels", inputs, y, [inputs, y, channels, plane]() mutable {
      const float* gy = y.grad().data();
      const int batch = y.shape().n;
      for (int n = 0; n < batch; ++n) {
        const float* src = gy + static_cast<std::size_t>(n) * channels * plane;
        for (Tensor& t : inputs) {
          const std::size_t len = static_cast<std::size_t>(t.shape().c) * plane;
          if (t.requires_grad()) {
            float* gx = t.grad_mut().data() + n * len;
            for (std::size_t i = 0; i < len; ++i) gx[i] += src[i];
          }
          src += len;
        }
      }
    });
  }
  return y;
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  const Shape xs = x.shape();
  require(begin >= 0 && count >= 1 && begin + count <= xs.c,
          "slice_channels: range out of bounds for " + xs.str());
  const std::size_t plane = xs.plane();
  const std::size_t len = static_cast<std::size_t>(count) * plane;
  Tensor y({xs.n, count, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n) {
    std::memcpy(y.data_mut().data() + n * len,
                x.data().data() + (static_cast<std::size_t>(n) * xs.c + begin) * plane,
                len * sizeof(float));
  }
  if (needs_recording({&x})) {
    Tape::active()->record("slice_channels", {x}, y, [x, y, begin, len, plane]() mutable {
      const Shape xs = x.shape();
      float* gx = x.grad_mut().data();
      const float* gy = y.grad().data();
      for (int n = 0; n < xs.n; ++n) {
        float* dst = gx + (static_cast<std::size_t>(n) * xs.c + begin) * plane;
        const float* src = gy + n * len;
        for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  auto xd = x.data();
  auto yd = y.data_mut();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
  if (needs_recording({&x})) {
    Tape::active()->record("relu", {x}, y, [x, y]() mutable {
      auto xd = x.data();
      auto gy = y.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < xd.size(); ++i) {
        if (xd[i] > 0.0f) gx[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor add(const Tensor& x, const Tensor& y) {
  require(x.shape() == y.shape(),
          "add: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
  Tensor z(x.shape());
  auto xd = x.data();
  auto yd = y.data();
  auto zd = z.data_mut();
  for (std::size_t i = 0; i < zd.size(); ++i) zd[i] = xd[i] + yd[i];
  if (needs_recording({&x, &y})) {
    Tape::active()->record("add", {x, y}, z, [x, y, z]() mutable {
      auto gz = z.grad();
      for (const Tensor* t : {&x, &y}) {
        if (!t->requires_grad()) continue;
        auto g = t->grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gz[i];
      }
    });
  }
  return z;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require(pred.shape() == target.shape(), "l1_loss: shape mismatch " +
                                              pred.shape().str() + " vs " +
                                              target.shape().str());
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += std::fabs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
  }
  Tensor loss({1, 1, 1, 1}, static_cast<float>(acc / static_cast<double>(p.size())));
  if (needs_recording({&pred, &target})) {
    Tape::active()->record("l1_loss", {pred, target}, loss, [pred, target, loss]() mutable {
      auto p = pred.data();
      auto t = target.data();
      const float scale = loss.grad()[0] / static_cast<float>(p.size());
      auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
      if (pred.requires_grad()) {
        auto g = pred.grad_mut();
        for (std::size_t i = 0; i < p.size(); ++i) g[i] += scale * sign(p[i] - t[i]);
      }
      if (target.requires_grad()) {
        auto g = target.grad_mut();
        for (std::size_t i = 0; i < p.size(); ++i) g[i] -= scale * sign(p[i] - t[i]);
      }
    });
  }
  return loss;
}

Tensor sum(const Tensor& x) {
  auto xd = x.data();
  const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
  Tensor s({1, 1, 1, 1}, static_cast<float>(total));
  if (needs_recording({&x})) {
    Tape::active()->record("sum", {x}, s, [x, s]() mutable {
      const float g = s.grad()[0];
      for (float& v : x.grad_mut()) v += g;
    });
  }
  return s;
}

}  // namespace dbdn
