#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dbdn/image.hpp"

namespace dbdn {

struct Network;

/// Single-channel image on the 8-bit scale.
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<double> data;

  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

/// Y = 16 + 65.481 R + 128.553 G + 24.966 B for RGB in [0, 1].
GrayImage rgb_to_y(const ImageRGB& img);

/// PSNR in dB after discarding `crop` pixels on every border. Returns +inf
/// for identical images.
double psnr(const GrayImage& a, const GrayImage& b, int crop);

/// Mean SSIM over all 11x11 windows (Gaussian, sigma 1.5) lying fully inside
/// the cropped images.
double ssim(const GrayImage& a, const GrayImage& b, int crop);

/// The normalized 11x11 Gaussian window used by ssim().
std::vector<double> ssim_window();

struct ImageScore {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ImageScore> per_image;
  std::vector<std::string> skipped;  // "name: reason"
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int scale = 0;
  int crop = 0;
  int excluded_from_means = 0;  // images with infinite PSNR

  /// Recomputes the means. Images with infinite PSNR are left out of both
  /// means unless every image is identical, in which case PSNR is +inf and
  /// SSIM is the plain mean.
  void finalize();
  std::string csv() const;
  std::string summary() const;
};

/// An aligned evaluation pair: LR input and the HR reference it came from.
struct EvalSample {
  std::string name;
  ImageRGB lr;
  ImageRGB hr;
};

/// Builds evaluation pairs from a directory of HR images: each HR is cropped
/// to a multiple of `scale` and bicubic-downscaled, then quantized to 8 bits.
std::vector<EvalSample> load_eval_samples(const std::filesystem::path& hr_dir, int scale,
                                          std::vector<std::string>* skipped = nullptr);

using Upscaler = std::function<ImageRGB(const ImageRGB& lr)>;

/// Scores an arbitrary upscaler. Its output is clamped and quantized to
/// 8 bits, converted to Y and compared to HR with crop = scale.
EvalReport evaluate_with(const Upscaler& upscale, const std::vector<EvalSample>& samples,
                         int scale, int workers = 1);

/// Runs the network on each full LR image.
EvalReport evaluate(const Network& net, const std::vector<EvalSample>& samples, int scale,
                    int workers = 1);

/// Bicubic interpolation to scale x the LR size.
ImageRGB bicubic_upscale(const ImageRGB& lr, int scale);
ImageRGB network_upscale(const Network& net, const ImageRGB& lr);

}  // namespace dbdn
