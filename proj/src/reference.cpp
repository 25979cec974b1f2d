#include "dbdn/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace dbdn::reference {

DTensor DTensor::from(const Tensor& t) {
  DTensor d(t.shape());
  auto src = t.data();
  for (std::size_t i = 0; i < src.size(); ++i) d.data[i] = src[i];
  return d;
}

Tensor DTensor::to_float() const {
  std::vector<float> v(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) v[i] = static_cast<float>(data[i]);
  return Tensor(shape, std::move(v));
}

DTensor conv2d(const DTensor& x, const DTensor& weight, const DTensor& bias, int stride,
               int padding) {
  const Shape xs = x.shape;
  const Shape ws = weight.shape;
  if (xs.c != ws.c) throw ShapeError("reference conv2d: channel mismatch");
  const int oh = (xs.h + 2 * padding - ws.h) / stride + 1;
  const int ow = (xs.w + 2 * padding - ws.w) / stride + 1;
  DTensor y({xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias.data[o];
          for (int c = 0; c < xs.c; ++c)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int iy = oy * stride - padding + ky;
                const int ix = ox * stride - padding + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += weight.at(o, c, ky, kx) * x.at(n, c, iy, ix);
              }
          y.at(n, o, oy, ox) = acc;
        }
  return y;
}

DTensor conv2d_transpose(const DTensor& x, const DTensor& weight, const DTensor& bias,
                         int stride, int padding) {
  const Shape xs = x.shape;
  const Shape ws = weight.shape;  // (in, out, kh, kw)
  if (xs.c != ws.n) throw ShapeError("reference conv2d_transpose: channel mismatch");
  const int oh = (xs.h - 1) * stride - 2 * padding + ws.h;
  const int ow = (xs.w - 1) * stride - 2 * padding + ws.w;
  DTensor y({xs.n, ws.c, oh, ow});
  for (int n = 0; n < xs.n; ++n) {
    for (int o = 0; o < ws.c; ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) y.at(n, o, yy, xx) = bias.data[o];
    // Every input pixel scatters a weighted kernel footprint.
    for (int c = 0; c < xs.c; ++c)
      for (int iy = 0; iy < xs.h; ++iy)
        for (int ix = 0; ix < xs.w; ++ix) {
          const double v = x.at(n, c, iy, ix);
          for (int o = 0; o < ws.c; ++o)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int oy = iy * stride - padding + ky;
                const int ox = ix * stride - padding + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                y.at(n, o, oy, ox) += v * weight.at(c, o, ky, kx);
              }
        }
  }
  return y;
}

DTensor pixel_shuffle(const DTensor& x, int scale) {
  const Shape xs = x.shape;
  const int a2 = scale * scale;
  if (xs.c % a2 != 0) throw ShapeError("reference pixel_shuffle: bad channel count");
  DTensor y({xs.n, xs.c / a2, xs.h * scale, xs.w * scale});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int i = 0; i < xs.h; ++i)
        for (int j = 0; j < xs.w; ++j) {
          const int oc = c / a2;
          const int di = (c % a2) / scale;
          const int dj = c % scale;
          y.at(n, oc, i * scale + di, j * scale + dj) = x.at(n, c, i, j);
        }
  return y;
}

DTensor concat_channels(const std::vector<DTensor>& xs) {
  Shape s = xs.at(0).shape;
  s.c = 0;
  for (const DTensor& t : xs) s.c += t.shape.c;
  DTensor y(s);
  for (int n = 0; n < s.n; ++n) {
    int offset = 0;
    for (const DTensor& t : xs) {
      for (int c = 0; c < t.shape.c; ++c)
        for (int i = 0; i < s.h; ++i)
          for (int j = 0; j < s.w; ++j) y.at(n, offset + c, i, j) = t.at(n, c, i, j);
      offset += t.shape.c;
    }
  }
  return y;
}

DTensor slice_channels(const DTensor& x, int begin, int count) {
  DTensor y({x.shape.n, count, x.shape.h, x.shape.w});
  for (int n = 0; n < x.shape.n; ++n)
    for (int c = 0; c < count; ++c)
      for (int i = 0; i < x.shape.h; ++i)
        for (int j = 0; j < x.shape.w; ++j) y.at(n, c, i, j) = x.at(n, begin + c, i, j);
  return y;
}

DTensor relu(const DTensor& x) {
  DTensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

DTensor add(const DTensor& x, const DTensor& y) {
  DTensor z = x;
  for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += y.data[i];
  return z;
}

double l1_loss(const DTensor& pred, const DTensor& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) acc += std::fabs(pred.data[i] - target.data[i]);
  return acc / static_cast<double>(pred.data.size());
}

double sum(const DTensor& x) {
  double acc = 0.0;
  for (double v : x.data) acc += v;
  return acc;
}

namespace {

class ParamCursor {
 public:
  explicit ParamCursor(std::span<const DTensor> p) : params_(p) {}
  DTensor conv(const DTensor& x, int stride, int padding) {
    const DTensor& w = next();
    const DTensor& b = next();
    return conv2d(x, w, b, stride, padding);
  }
  DTensor deconv(const DTensor& x, int stride, int padding) {
    const DTensor& w = next();
    const DTensor& b = next();
    return conv2d_transpose(x, w, b, stride, padding);
  }
  bool exhausted() const { return pos_ == params_.size(); }

 private:
  const DTensor& next() {
    if (pos_ >= params_.size()) throw ShapeError("reference forward: ran out of parameters");
    return params_[pos_++];
  }
  std::span<const DTensor> params_;
  std::size_t pos_ = 0;
};

}  // namespace

DTensor forward(const ModelConfig& cfg, std::span<const DTensor> params, const DTensor& lr) {
  ParamCursor p(params);
  const DTensor l0 = p.conv(lr, 1, 1);
  std::vector<DTensor> h;
  for (int b = 1; b <= cfg.blocks; ++b) {
    DTensor input;
    if (b == 1) {
      input = l0;
    } else if (cfg.variant == Variant::kWithoutInter) {
      input = h.back();
    } else {
      std::vector<DTensor> parts;
      if (cfg.prepend_extraction) parts.push_back(l0);
      parts.insert(parts.end(), h.begin(), h.end());
      input = concat_channels(parts);
    }
    const DTensor lb0 = p.conv(input, 1, 0);
    std::vector<DTensor> layers{lb0};
    for (int i = 1; i <= cfg.layers; ++i) {
      layers.push_back(relu(p.conv(concat_channels(layers), 1, 1)));
    }
    const DTensor cb = p.conv(concat_channels(layers), 1, 0);
    h.push_back(add(cb, lb0));
  }
  const DTensor t = p.conv(concat_channels(h), 1, 0);
  DTensor up = add(t, l0);
  if (cfg.variant == Variant::kDbdnPlus) {
    up = pixel_shuffle(p.conv(up, 1, 1), cfg.scale);
  } else if (cfg.scale == 3) {
    up = p.deconv(up, 3, 3);
  } else {
    up = p.deconv(up, 2, 2);
    if (cfg.scale == 4) up = p.deconv(up, 2, 2);
  }
  DTensor out = p.conv(up, 1, 1);
  if (!p.exhausted()) throw ShapeError("reference forward: unused parameters");
  return out;
}

}  // namespace dbdn::reference
