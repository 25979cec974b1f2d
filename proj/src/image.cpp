#include "dbdn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dbdn {

namespace {

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

ImageRGB load_bmp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  const std::vector<std::uint8_t> b{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') {
    throw ImageError(path.string() + ": not a BMP file");
  }
  const std::uint32_t offset = le32(&b[10]);
  const std::uint32_t header = le32(&b[14]);
  const auto width = static_cast<std::int32_t>(le32(&b[18]));
  const auto height_raw = static_cast<std::int32_t>(le32(&b[22]));
  const std::uint16_t bpp = le16(&b[28]);
  const std::uint32_t compression = le32(&b[30]);
  if (header < 40 || width <= 0 || height_raw == 0) {
    throw ImageError(path.string() + ": unsupported BMP header");
  }
  // BI_RGB, or BI_BITFIELDS with the standard 32-bit BGRA masks.
  if (compression != 0 && !(compression == 3 && bpp == 32)) {
    throw ImageError(path.string() + ": compressed BMP not supported");
  }
  if (bpp != 8 && bpp != 24 && bpp != 32) {
    throw ImageError(path.string() + ": unsupported BMP depth " + std::to_string(bpp));
  }
  const bool bottom_up = height_raw > 0;
  const int height = bottom_up ? height_raw : -height_raw;
  std::vector<std::uint8_t> palette;
  if (bpp == 8) {
    std::uint32_t colors = le32(&b[46]);
    if (colors == 0) colors = 256;
    const std::size_t pal_off = 14 + header;
    if (pal_off + colors * 4 > b.size()) throw ImageError(path.string() + ": truncated palette");
    palette.assign(b.begin() + pal_off, b.begin() + pal_off + colors * 4);
  }
  const std::size_t row_bytes = ((static_cast<std::size_t>(width) * bpp + 31) / 32) * 4;
  if (offset + row_bytes * height > b.size()) throw ImageError(path.string() + ": truncated pixels");

  ImageRGB img(height, width);
  for (int y = 0; y < height; ++y) {
    const int src_row = bottom_up ? height - 1 - y : y;
    const std::uint8_t* row = b.data() + offset + row_bytes * src_row;
    for (int x = 0; x < width; ++x) {
      std::uint8_t r, g, bl;
      if (bpp == 8) {
        const std::size_t i = static_cast<std::size_t>(row[x]) * 4;
        if (i + 2 >= palette.size()) throw ImageError(path.string() + ": palette index out of range");
        bl = palette[i]; g = palette[i + 1]; r = palette[i + 2];
      } else {
        const std::uint8_t* px = row + static_cast<std::size_t>(x) * (bpp / 8);
        bl = px[0]; g = px[1]; r = px[2];
      }
      img.at(y, x, 0) = r / 255.0f;
      img.at(y, x, 1) = g / 255.0f;
      img.at(y, x, 2) = bl / 255.0f;
    }
  }
  return img;
}

ImageRGB load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageError(path.string() + ": " + msg);
  }
  ImageRGB img(static_cast<int>(image.height), static_cast<int>(image.width));
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = buffer[i] / 255.0f;
  return img;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

ImageRGB::ImageRGB(int height, int width, float fill)
    : h(height), w(width), data(static_cast<std::size_t>(height) * width * 3, fill) {
  if (height < 1 || width < 1) throw ImageError("image dims must be >= 1");
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".bmp";
}

ImageRGB load_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".bmp") return load_bmp(path);
  if (ext == ".png") return load_png(path);
  throw ImageError(path.string() + ": unsupported image format");
}

void save_png(const ImageRGB& img, const std::filesystem::path& path) {
  if (img.empty()) throw ImageError("save_png: empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::uint8_t> buffer(img.data.size());
  std::transform(img.data.begin(), img.data.end(), buffer.begin(), to_byte);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw ImageError(path.string() + ": " + image.message);
  }
}

ImageRGB quantize(const ImageRGB& img) {
  ImageRGB out = img;
  for (float& v : out.data) v = to_byte(v) / 255.0f;
  return out;
}

ImageRGB crop(const ImageRGB& img, int y, int x, int h, int w) {
  if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > img.h || x + w > img.w) {
    throw ImageError("crop window out of bounds");
  }
  ImageRGB out(h, w);
  for (int r = 0; r < h; ++r) {
    const float* src = &img.data[(static_cast<std::size_t>(y + r) * img.w + x) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.data[static_cast<std::size_t>(r) * w * 3]);
  }
  return out;
}

ImageRGB center_crop_to_multiple(const ImageRGB& img, int multiple) {
  const int h = img.h - img.h % multiple;
  const int w = img.w - img.w % multiple;
  if (h < 1 || w < 1) throw ImageError("image smaller than crop multiple");
  return crop(img, (img.h - h) / 2, (img.w - w) / 2, h, w);
}

ImageRGB modcrop(const ImageRGB& img, int multiple) {
  const int h = img.h - img.h % multiple;
  const int w = img.w - img.w % multiple;
  if (h < 1 || w < 1) throw ImageError("image smaller than crop multiple");
  return crop(img, 0, 0, h, w);
}

ImageRGB dihedral(const ImageRGB& img, int k) {
  if (k < 0 || k >= 8) throw std::invalid_argument("dihedral index must be in [0, 8)");
  const bool mirror = k >= 4;
  const int turns = k % 4;
  const int oh = (turns % 2 == 0) ? img.h : img.w;
  const int ow = (turns % 2 == 0) ? img.w : img.h;
  ImageRGB out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      // Source pixel of the rotated (counter-clockwise) image.
      int sy = 0, sx = 0;
      switch (turns) {
        case 0: sy = y; sx = x; break;
        case 1: sy = x; sx = img.w - 1 - y; break;
        case 2: sy = img.h - 1 - y; sx = img.w - 1 - x; break;
        case 3: sy = img.h - 1 - x; sx = y; break;
      }
      if (mirror) sx = img.w - 1 - sx;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

int dihedral_inverse(int k) {
  if (k < 4) return (4 - k) % 4;
  return k;  // reflections are involutions
}

Tensor to_tensor(std::span<const ImageRGB> images) {
  if (images.empty()) throw ImageError("to_tensor: no images");
  const int h = images.front().h;
  const int w = images.front().w;
  Tensor t({static_cast<int>(images.size()), 3, h, w});
  auto d = t.data_mut();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const ImageRGB& img = images[n];
    if (img.h != h || img.w != w) throw ImageError("to_tensor: images differ in size");
    for (int c = 0; c < 3; ++c) {
      float* dst = d.data() + (n * 3 + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = img.data[i * 3 + c];
    }
  }
  return t;
}

Tensor to_tensor(const ImageRGB& image) {
  return to_tensor(std::span<const ImageRGB>(&image, 1));
}

ImageRGB from_tensor(const Tensor& t, int index) {
  const Shape s = t.shape();
  if (s.c != 3 || index < 0 || index >= s.n) throw ImageError("from_tensor: bad shape or index");
  ImageRGB img(s.h, s.w);
  const std::size_t plane = s.plane();
  auto d = t.data();
  for (int c = 0; c < 3; ++c) {
    const float* src = d.data() + (static_cast<std::size_t>(index) * 3 + c) * plane;
    for (std::size_t i = 0; i < plane; ++i) img.data[i * 3 + c] = src[i];
  }
  return img;
}

}  // namespace dbdn
