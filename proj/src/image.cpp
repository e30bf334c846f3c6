// Copyright 2026 The ttfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ttfuse/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ttfuse/error.hpp"

namespace ttfuse {
namespace {

namespace fs = std::filesystem;

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorKind::kNotFound, "no such image file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  // Signature (8) + IHDR length/type (8) + IHDR body (13).
  if (bytes.size() < 29) {
    throw Error(ErrorKind::kTruncated, "truncated PNG header in " + path.string());
  }
  if (std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw Error(ErrorKind::kCorrupt, "PNG without leading IHDR: " + path.string());
  }
  const std::uint8_t* ihdr = bytes.data() + 16;
  const int bit_depth = ihdr[8];
  const int color_type = ihdr[9];
  const int interlace = ihdr[12];
  if (bit_depth != 8) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "unsupported PNG bit depth " + std::to_string(bit_depth) +
                    " in " + path.string() + " (only 8-bit)");
  }
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "unsupported PNG color type " + std::to_string(color_type) +
                    " in " + path.string() + " (gray or RGB without alpha)");
  }
  if (interlace != 0) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "interlaced PNG not supported: " + path.string());
  }
  const bool gray = color_type == PNG_COLOR_TYPE_GRAY;
  const std::uint32_t width = read_be32(ihdr);
  const std::uint32_t height = read_be32(ihdr + 4);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::kCorrupt,
                "cannot decode " + path.string() + ": " + image.message);
  }
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    const bool short_data = message.find("end") != std::string::npos ||
                            message.find("Not enough") != std::string::npos ||
                            message.find("truncat") != std::string::npos;
    throw Error(short_data ? ErrorKind::kTruncated : ErrorKind::kCorrupt,
                "cannot decode " + path.string() + ": " + message);
  }
  std::vector<double> values(buffer.size());
  std::transform(buffer.begin(), buffer.end(), values.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  if (gray) {
    GrayImage out;
    out.width = static_cast<int>(width);
    out.height = static_cast<int>(height);
    out.pixels = std::move(values);
    return out;
  }
  return ColorImage{static_cast<int>(width), static_cast<int>(height),
                    std::move(values)};
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

Image decode_pgm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::size_t pos = 2;
  int fields[3] = {0, 0, 0};
  for (int& field : fields) {
    const std::string token = pgm_token(bytes, pos);
    if (token.empty()) {
      throw Error(ErrorKind::kTruncated, "truncated PGM header in " + path.string());
    }
    try {
      std::size_t used = 0;
      field = std::stoi(token, &used);
      if (used != token.size() || field <= 0) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kCorrupt,
                  "bad PGM header field '" + token + "' in " + path.string());
    }
  }
  if (fields[2] != 255) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "unsupported PGM maxval " + std::to_string(fields[2]) + " in " +
                    path.string() + " (only 255)");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorKind::kTruncated, "truncated PGM header in " + path.string());
  }
  ++pos;
  GrayImage out(fields[0], fields[1]);
  if (bytes.size() - pos < out.pixels.size()) {
    throw Error(ErrorKind::kTruncated,
                "truncated PGM payload in " + path.string() + ": expected " +
                    std::to_string(out.pixels.size()) + " bytes, found " +
                    std::to_string(bytes.size() - pos));
  }
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = bytes[pos + i] / 255.0;
  }
  return out;
}

std::string extension_of(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void write_png(const fs::path& path, int width, int height, bool gray,
               const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0,
                               nullptr)) {
    throw Error(ErrorKind::kIo,
                "cannot write " + path.string() + ": " + image.message);
  }
}

}  // namespace

Image load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return decode_png(bytes, path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return decode_pgm(bytes, path);
  }
  throw Error(ErrorKind::kUnsupportedFormat,
              "not a PNG or binary PGM file: " + path.string());
}

void save_image(const fs::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> bytes(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(), to_byte);
  const std::string ext = extension_of(path);
  if (ext == ".png") {
    write_png(path, image.width, image.height, true, bytes);
  } else if (ext == ".pgm") {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  } else {
    throw Error(ErrorKind::kUnsupportedFormat,
                "unknown image extension for " + path.string());
  }
}

void save_image(const fs::path& path, const ColorImage& image) {
  if (extension_of(path) != ".png") {
    throw Error(ErrorKind::kUnsupportedFormat,
                "color images are written as PNG only: " + path.string());
  }
  std::vector<std::uint8_t> bytes(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(), to_byte);
  write_png(path, image.width, image.height, false, bytes);
}

std::pair<GrayImage, ChromaPlanes> split_luma(const ColorImage& color) {
  GrayImage luma(color.width, color.height);
  ChromaPlanes chroma{color.width, color.height,
                      std::vector<double>(luma.pixels.size()),
                      std::vector<double>(luma.pixels.size())};
  for (std::size_t i = 0; i < luma.pixels.size(); ++i) {
    const double r = color.rgb[3 * i];
    const double g = color.rgb[3 * i + 1];
    const double b = color.rgb[3 * i + 2];
    if (r == g && g == b) {
      luma.pixels[i] = r;
      chroma.cb[i] = 0.5;
      chroma.cr[i] = 0.5;
      continue;
    }
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    luma.pixels[i] = y;
    chroma.cb[i] = 0.564 * (b - y) + 0.5;
    chroma.cr[i] = 0.713 * (r - y) + 0.5;
  }
  return {std::move(luma), std::move(chroma)};
}

ColorImage merge_luma(const GrayImage& luma, const ChromaPlanes& chroma) {
  if (luma.width != chroma.width || luma.height != chroma.height) {
    throw Error(ErrorKind::kShapeMismatch,
                "merge_luma: luma " + std::to_string(luma.width) + "x" +
                    std::to_string(luma.height) + " vs chroma " +
                    std::to_string(chroma.width) + "x" +
                    std::to_string(chroma.height));
  }
  ColorImage out{luma.width, luma.height, std::vector<double>(3 * luma.pixels.size())};
  for (std::size_t i = 0; i < luma.pixels.size(); ++i) {
    const double y = luma.pixels[i];
    double r = y, g = y, b = y;
    if (chroma.cb[i] != 0.5 || chroma.cr[i] != 0.5) {
      r = y + (chroma.cr[i] - 0.5) / 0.713;
      b = y + (chroma.cb[i] - 0.5) / 0.564;
      g = (y - 0.299 * r - 0.114 * b) / 0.587;
    }
    auto clamp01 = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0); };
    out.rgb[3 * i] = clamp01(r);
    out.rgb[3 * i + 1] = clamp01(g);
    out.rgb[3 * i + 2] = clamp01(b);
  }
  return out;
}

GrayImage to_gray(const Image& image) {
  if (const auto* gray = std::get_if<GrayImage>(&image)) return *gray;
  return split_luma(std::get<ColorImage>(image)).first;
}

GrayImage quantize(const GrayImage& image) {
  GrayImage out = image;
  for (double& v : out.pixels) v = to_byte(v) / 255.0;
  return out;
}

Tensor to_tensor(const GrayImage& image) {
  return Tensor(Shape{1, 1, image.height, image.width}, image.pixels);
}

GrayImage to_image(const Tensor& tensor) {
  const Shape& s = tensor.shape();
  if (s.n != 1 || s.c != 1) {
    throw Error(ErrorKind::kShapeMismatch,
                "to_image: expected a 1x1xHxW tensor, got " + s.str());
  }
  GrayImage out(s.w, s.h);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = tensor[i];
    out.pixels[i] = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace ttfuse
