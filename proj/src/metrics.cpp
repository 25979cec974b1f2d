#include "dbdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dbdn/model.hpp"

namespace dbdn {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
constexpr int kMinNetworkInput = 8;

void check_pair(const GrayImage& a, const GrayImage& b, int crop) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("metric: image dims differ");
  if (crop < 0 || a.h <= 2 * crop || a.w <= 2 * crop) {
    throw std::invalid_argument("metric: crop " + std::to_string(crop) + " too large for " +
                                std::to_string(a.h) + "x" + std::to_string(a.w));
  }
}

std::vector<double> gaussian_1d() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-region separable filtering of an h x w buffer.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& g) {
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * src[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::vector<double> cropped(const GrayImage& img, int crop) {
  const int h = img.h - 2 * crop;
  const int w = img.w - 2 * crop;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.push_back(img.at(y + crop, x + crop));
  }
  return out;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

GrayImage rgb_to_y(const ImageRGB& img) {
  GrayImage y;
  y.h = img.h;
  y.w = img.w;
  y.data.resize(static_cast<std::size_t>(img.h) * img.w);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double r = img.data[i * 3];
    const double g = img.data[i * 3 + 1];
    const double b = img.data[i * 3 + 2];
    y.data[i] = 16.0 + 65.481 * r + 128.553 * g + 24.966 * b;
  }
  return y;
}

double psnr(const GrayImage& a, const GrayImage& b, int crop) {
  check_pair(a, b, crop);
  double sse = 0.0;
  std::size_t count = 0;
  for (int y = crop; y < a.h - crop; ++y) {
    for (int x = crop; x < a.w - crop; ++x) {
      const double d = a.at(y, x) - b.at(y, x);
      sse += d * d;
      ++count;
    }
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / (sse / static_cast<double>(count)));
}

std::vector<double> ssim_window() {
  const std::vector<double> g = gaussian_1d();
  std::vector<double> w(kWindow * kWindow);
  for (int i = 0; i < kWindow; ++i) {
    for (int j = 0; j < kWindow; ++j) w[i * kWindow + j] = g[i] * g[j];
  }
  return w;
}

double ssim(const GrayImage& a, const GrayImage& b, int crop) {
  check_pair(a, b, crop);
  const int h = a.h - 2 * crop;
  const int w = a.w - 2 * crop;
  if (h < kWindow || w < kWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window after crop");
  }
  const std::vector<double> x = cropped(a, crop);
  const std::vector<double> y = cropped(b, crop);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const std::vector<double> g = gaussian_1d();
  const auto mu_x = filter_valid(x, h, w, g);
  const auto mu_y = filter_valid(y, h, w, g);
  const auto e_xx = filter_valid(xx, h, w, g);
  const auto e_yy = filter_valid(yy, h, w, g);
  const auto e_xy = filter_valid(xy, h, w, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
             ((mx * mx + my * my + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mu_x.size());
}

void EvalReport::finalize() {
  double sum_psnr = 0.0, sum_ssim = 0.0, all_ssim = 0.0;
  int finite = 0;
  excluded_from_means = 0;
  for (const ImageScore& s : per_image) {
    all_ssim += s.ssim;
    if (std::isinf(s.psnr)) {
      ++excluded_from_means;
      continue;
    }
    sum_psnr += s.psnr;
    sum_ssim += s.ssim;
    ++finite;
  }
  if (per_image.empty()) {
    mean_psnr = 0.0;
    mean_ssim = 0.0;
  } else if (finite == 0) {
    mean_psnr = std::numeric_limits<double>::infinity();
    mean_ssim = all_ssim / static_cast<double>(per_image.size());
  } else {
    mean_psnr = sum_psnr / finite;
    mean_ssim = sum_ssim / finite;
  }
}

std::string EvalReport::csv() const {
  std::ostringstream os;
  os << "image,psnr,ssim\n";
  for (const ImageScore& s : per_image) {
    os << s.name << ',' << format_number(s.psnr) << ',' << std::fixed << std::setprecision(6)
       << s.ssim << '\n';
  }
  return os.str();
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os << "scale=x" << scale << " crop=" << crop << " images=" << per_image.size()
     << " mean_psnr=" << format_number(mean_psnr) << " mean_ssim=" << std::fixed
     << std::setprecision(4) << mean_ssim;
  if (excluded_from_means > 0) {
    os << " (" << excluded_from_means << " identical image(s) excluded from means)";
  }
  if (!skipped.empty()) os << " skipped=" << skipped.size();
  return os.str();
}

ImageRGB bicubic_upscale(const ImageRGB& lr, int scale) {
  return bicubic_resize(lr, lr.h * scale, lr.w * scale);
}

ImageRGB network_upscale(const Network& net, const ImageRGB& lr) {
  return from_tensor(forward(net, to_tensor(lr)));
}

EvalReport evaluate_with(const Upscaler& upscale, const std::vector<EvalSample>& samples,
                         int scale, int workers) {
  EvalReport report;
  report.scale = scale;
  report.crop = scale;
  std::vector<std::optional<ImageScore>> scores(samples.size());
  std::vector<std::string> errors(samples.size());
  auto score_one = [&](std::size_t i) {
    const EvalSample& s = samples[i];
    if (s.lr.h < kMinNetworkInput || s.lr.w < kMinNetworkInput) {
      errors[i] = s.name + ": LR smaller than " + std::to_string(kMinNetworkInput) + " pixels";
      return;
    }
    const ImageRGB sr = quantize(upscale(s.lr));
    if (sr.h != s.hr.h || sr.w != s.hr.w) {
      errors[i] = s.name + ": upscaled size does not match HR";
      return;
    }
    const GrayImage ys = rgb_to_y(sr);
    const GrayImage yh = rgb_to_y(s.hr);
    scores[i] = ImageScore{s.name, psnr(ys, yh, scale), ssim(ys, yh, scale)};
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) score_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < samples.size(); i += n_workers) score_one(i);
      });
    }
    for (std::thread& th : pool) th.join();
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (scores[i]) report.per_image.push_back(*scores[i]);
    if (!errors[i].empty()) report.skipped.push_back(errors[i]);
  }
  report.finalize();
  return report;
}

EvalReport evaluate(const Network& net, const std::vector<EvalSample>& samples, int scale,
                    int workers) {
  if (net.config.scale != scale) {
    throw std::invalid_argument("evaluate: network scale x" + std::to_string(net.config.scale) +
                                " does not match requested x" + std::to_string(scale));
  }
  return evaluate_with([&net](const ImageRGB& lr) { return network_upscale(net, lr); },
                       samples, scale, workers);
}

}  // namespace dbdn
