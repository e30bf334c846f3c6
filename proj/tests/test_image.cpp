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

#include <doctest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "support.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/image.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;
using ttfuse::testing::random_image;
using ttfuse::testing::scratch_dir;

namespace {

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  put_be32(out, static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size()))));
}

// Hand-assembled PNG header; only IHDR and IEND.
std::vector<std::uint8_t> png_header(int depth, int color, int interlace) {
  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, 4);
  put_be32(ihdr, 4);
  ihdr.insert(ihdr.end(), {static_cast<std::uint8_t>(depth), static_cast<std::uint8_t>(color), 0, 0,
                           static_cast<std::uint8_t>(interlace)});
  chunk(out, "IHDR", ihdr);
  chunk(out, "IEND", {});
  return out;
}

ErrorKind load_error(const fs::path& path) {
  try {
    load_image(path);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("load succeeded: " << path);
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("pgm decoding of a hand-written file") {
    const fs::path dir = scratch_dir("pgm");
    std::vector<std::uint8_t> bytes{'P', '5', '\n', '#', ' ', 'x', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n'};
    bytes.insert(bytes.end(), {0, 128, 255, 64});
    write_bytes(dir / "t.pgm", bytes);
    const Image img = load_image(dir / "t.pgm");
    REQUIRE(std::holds_alternative<GrayImage>(img));
    const GrayImage& g = std::get<GrayImage>(img);
    CHECK(g.width == 2);
    CHECK(g.pixels == std::vector<double>{0.0, 128 / 255.0, 1.0, 64 / 255.0});

    save_image(dir / "u.pgm", g);
    CHECK(read_bytes(dir / "u.pgm").size() >= 4);
    CHECK(std::get<GrayImage>(load_image(dir / "u.pgm")).pixels == g.pixels);

    bytes.pop_back();
    write_bytes(dir / "short.pgm", bytes);
    CHECK(load_error(dir / "short.pgm") == ErrorKind::kTruncated);
    write_bytes(dir / "deep.pgm", {'P', '5', ' ', '1', ' ', '1', ' ', '6', '5', '5', '3', '5', '\n', 0, 0});
    CHECK(load_error(dir / "deep.pgm") == ErrorKind::kUnsupportedFormat);
  }

  TEST_CASE("png round trips") {
    const fs::path dir = scratch_dir("png");
    const GrayImage g = random_image(37, 23, 5);
    save_image(dir / "g.png", g);
    const GrayImage back = std::get<GrayImage>(load_image(dir / "g.png"));
    CHECK(back.width == 37);
    CHECK(back.height == 23);
    CHECK(back.pixels == g.pixels);

    ColorImage c{3, 2, {}};
    for (int i = 0; i < 18; ++i) c.rgb.push_back((i * 37 % 256) / 255.0);
    save_image(dir / "c.png", c);
    const Image loaded = load_image(dir / "c.png");
    REQUIRE(std::holds_alternative<ColorImage>(loaded));
    CHECK(std::get<ColorImage>(loaded).rgb == c.rgb);

    save_image(dir / "q.png", GrayImage(2, 1, 0.5002));
    CHECK(std::get<GrayImage>(load_image(dir / "q.png")).pixels[0] == 128 / 255.0);
    CHECK_THROWS_AS(save_image(dir / "c.pgm", c), Error);
    CHECK_THROWS_AS(save_image(dir / "g.bmp", g), Error);
  }

  TEST_CASE("load errors carry their kind") {
    const fs::path dir = scratch_dir("errors");
    CHECK(load_error(dir / "missing.png") == ErrorKind::kNotFound);
    write_bytes(dir / "deep.png", png_header(16, 0, 0));
    CHECK(load_error(dir / "deep.png") == ErrorKind::kUnsupportedFormat);
    write_bytes(dir / "laced.png", png_header(8, 0, 1));
    CHECK(load_error(dir / "laced.png") == ErrorKind::kUnsupportedFormat);
    write_bytes(dir / "palette.png", png_header(8, 3, 0));
    CHECK(load_error(dir / "palette.png") == ErrorKind::kUnsupportedFormat);
    write_bytes(dir / "junk.png", {'h', 'e', 'l', 'l', 'o'});
    CHECK(load_error(dir / "junk.png") == ErrorKind::kUnsupportedFormat);

    save_image(dir / "ok.png", random_image(64, 64, 1));
    std::vector<std::uint8_t> bytes = read_bytes(dir / "ok.png");
    bytes.resize(bytes.size() / 2);
    write_bytes(dir / "cut.png", bytes);
    CHECK(load_error(dir / "cut.png") == ErrorKind::kTruncated);
  }

  TEST_CASE("luma split and merge") {
    ColorImage red{1, 1, {1.0, 0.0, 0.0}};
    const auto [y, chroma] = split_luma(red);
    CHECK(y.pixels[0] == doctest::Approx(0.299).epsilon(1e-15));
    CHECK(chroma.cr[0] == doctest::Approx(0.5 + 0.713 * 0.701).epsilon(1e-15));
    CHECK(chroma.cr[0] == doctest::Approx(0.99998).epsilon(1e-4));
    CHECK(chroma.cb[0] == doctest::Approx(0.5 - 0.564 * 0.299).epsilon(1e-15));

    ttfuse::SplitMix64 rng(3);
    ColorImage c{16, 16, {}};
    for (int i = 0; i < 16 * 16 * 3; ++i) c.rgb.push_back(rng.uniform(0, 1));
    const auto [luma, planes] = split_luma(c);
    const ColorImage back = merge_luma(luma, planes);
    for (std::size_t i = 0; i < c.rgb.size(); ++i) CHECK(std::abs(back.rgb[i] - c.rgb[i]) < 1.0 / 255);

    ColorImage grey{2, 1, {0.2, 0.2, 0.2, 0.7, 0.7, 0.7}};
    const auto [gl, gp] = split_luma(grey);
    CHECK(gl.pixels == std::vector<double>{0.2, 0.7});
    CHECK(merge_luma(gl, gp).rgb == grey.rgb);
    CHECK(to_gray(Image(grey)).pixels == gl.pixels);

    CHECK_THROWS_AS(merge_luma(GrayImage(2, 2), gp), Error);
  }

  TEST_CASE("tensor conversion clamps and quantizes") {
    const Tensor t(Shape{1, 1, 1, 4}, std::vector<double>{-0.5, 0.25, 1.5, std::nan("")});
    const GrayImage img = to_image(t);
    CHECK(img.pixels == std::vector<double>{0.0, 0.25, 1.0, 0.0});
    CHECK(quantize(img).pixels[1] == 64 / 255.0);
    CHECK(to_tensor(img).shape() == Shape{1, 1, 1, 4});
    CHECK_THROWS_AS(to_image(Tensor(Shape{1, 2, 1, 1})), Error);
  }
}
