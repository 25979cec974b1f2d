#include <cmath>
#include <vector>

#include "dbdn/image.hpp"

namespace dbdn {

double cubic_kernel(double x) {
  const double ax = std::fabs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

ResampleWeights bicubic_weights(int in_len, int out_len) {
  if (in_len < 1 || out_len < 1) throw ImageError("resize: dims must be >= 1");
  const double scale = static_cast<double>(out_len) / in_len;
  const bool shrink = scale < 1.0;
  const double width = shrink ? 4.0 / scale : 4.0;
  const int taps = static_cast<int>(std::ceil(width)) + 2;

  ResampleWeights rw;
  rw.taps = taps;
  rw.indices.resize(static_cast<std::size_t>(out_len) * taps);
  rw.weights.resize(static_cast<std::size_t>(out_len) * taps);
  const int period = 2 * in_len;
  for (int x = 1; x <= out_len; ++x) {
    // 1-based coordinates throughout, as in imresize.
    const double u = x / scale + 0.5 * (1.0 - 1.0 / scale);
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double total = 0.0;
    const std::size_t row = static_cast<std::size_t>(x - 1) * taps;
    for (int t = 0; t < taps; ++t) {
      const double d = u - (left + t);
      const double w = shrink ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      rw.weights[row + t] = w;
      total += w;
      // Reflect into [1, in_len]: the sequence 1..n, n..1 repeated.
      int m = (left + t - 1) % period;
      if (m < 0) m += period;
      rw.indices[row + t] = m < in_len ? m : period - 1 - m;
    }
    for (int t = 0; t < taps; ++t) rw.weights[row + t] /= total;
  }
  return rw;
}

namespace {

// Resamples along rows (axis 0) or columns (axis 1) of an h x w x 3 buffer.
std::vector<double> resample_axis(const std::vector<double>& src, int h, int w, int out_len,
                                  bool along_height) {
  const int in_len = along_height ? h : w;
  const ResampleWeights rw = bicubic_weights(in_len, out_len);
  const int oh = along_height ? out_len : h;
  const int ow = along_height ? w : out_len;
  std::vector<double> dst(static_cast<std::size_t>(oh) * ow * 3, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int o = along_height ? y : x;
      const std::size_t row = static_cast<std::size_t>(o) * rw.taps;
      double acc[3] = {0.0, 0.0, 0.0};
      for (int t = 0; t < rw.taps; ++t) {
        const double wt = rw.weights[row + t];
        if (wt == 0.0) continue;
        const int i = rw.indices[row + t];
        const std::size_t s = along_height ? (static_cast<std::size_t>(i) * w + x) * 3
                                           : (static_cast<std::size_t>(y) * w + i) * 3;
        acc[0] += wt * src[s];
        acc[1] += wt * src[s + 1];
        acc[2] += wt * src[s + 2];
      }
      const std::size_t d = (static_cast<std::size_t>(y) * ow + x) * 3;
      dst[d] = acc[0];
      dst[d + 1] = acc[1];
      dst[d + 2] = acc[2];
    }
  }
  return dst;
}

}  // namespace

ImageRGB bicubic_resize(const ImageRGB& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ImageError("resize: output dims must be >= 1");
  std::vector<double> buf(img.data.begin(), img.data.end());
  // imresize resizes the dimension with the smaller scale factor first,
  // height first on ties.
  const double sh = static_cast<double>(out_h) / img.h;
  const double sw = static_cast<double>(out_w) / img.w;
  if (sh <= sw) {
    buf = resample_axis(buf, img.h, img.w, out_h, true);
    buf = resample_axis(buf, out_h, img.w, out_w, false);
  } else {
    buf = resample_axis(buf, img.h, img.w, out_w, false);
    buf = resample_axis(buf, img.h, out_w, out_h, true);
  }
  ImageRGB out(out_h, out_w);
  for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = static_cast<float>(buf[i]);
  return out;
}

}  // namespace dbdn
