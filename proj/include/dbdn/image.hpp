#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "dbdn/tensor.hpp"

namespace dbdn {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved RGB image, row-major (h, w, c), values nominally in [0, 1].
struct ImageRGB {
  int h = 0;
  int w = 0;
  std::vector<float> data;

  ImageRGB() = default;
  ImageRGB(int height, int width, float fill = 0.0f);

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }
  bool empty() const { return data.empty(); }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

/// Reads an 8-bit PNG or an uncompressed BMP; values are v / 255.
ImageRGB load_image(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG, storing round(clamp(v, 0, 1) * 255).
void save_png(const ImageRGB& img, const std::filesystem::path& path);
bool is_image_file(const std::filesystem::path& path);

/// round(clamp(v, 0, 1) * 255) / 255, i.e. what a PNG round trip yields.
ImageRGB quantize(const ImageRGB& img);
ImageRGB crop(const ImageRGB& img, int y, int x, int h, int w);
/// Centre crop to the largest dims divisible by `multiple`.
ImageRGB center_crop_to_multiple(const ImageRGB& img, int multiple);
/// Top-left crop to the largest dims divisible by `multiple` (benchmark
/// convention for evaluation sets).
ImageRGB modcrop(const ImageRGB& img, int multiple);

/// One of the eight symmetries of the square: k in [0, 4) rotates by k * 90
/// degrees counter-clockwise, k in [4, 8) mirrors horizontally first.
ImageRGB dihedral(const ImageRGB& img, int k);
/// Index of the transform undoing dihedral(., k).
int dihedral_inverse(int k);

/// Separable resampling weights along one axis.
struct ResampleWeights {
  int taps = 0;                // weights per output sample
  std::vector<int> indices;    // out_len * taps, 0-based, already reflected
  std::vector<double> weights; // out_len * taps, each row sums to 1
};

/// Cubic kernel with a = -0.5.
double cubic_kernel(double x);
/// MATLAB imresize weights: kernel stretched by 1/scale when shrinking
/// (antialiasing), symmetric reflection at the borders.
ResampleWeights bicubic_weights(int in_len, int out_len);

ImageRGB bicubic_resize(const ImageRGB& img, int out_h, int out_w);

/// Stacks images of identical size into an (n, 3, h, w) tensor.
Tensor to_tensor(std::span<const ImageRGB> images);
Tensor to_tensor(const ImageRGB& image);
/// Sample `index` of an (n, 3, h, w) tensor, unclamped.
ImageRGB from_tensor(const Tensor& t, int index = 0);

}  // namespace dbdn
