#include "cri/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cri/errors.hpp"

namespace cri {

bool Image::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

namespace {

std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, png_uint_32 format,
                                   int& height, int& width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return buffer;
}

void write_raw(const std::filesystem::path& path, png_uint_32 format, int height, int width,
               const std::vector<std::uint8_t>& buffer) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  auto raw = read_raw(path, PNG_FORMAT_RGB, h, w);
  Image img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

Mask read_mask_png(const std::filesystem::path& path) {
  Mask m;
  auto raw = read_raw(path, PNG_FORMAT_GRAY, m.height, m.width);
  m.bits.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) m.bits[i] = raw[i] != 0 ? 1 : 0;
  return m;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> raw(image.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(image.data[i]);
  write_raw(path, PNG_FORMAT_RGB, image.height, image.width, raw);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> raw(mask.bits.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.bits[i] ? 255 : 0;
  write_raw(path, PNG_FORMAT_GRAY, mask.height, mask.width, raw);
}

Image quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace cri
