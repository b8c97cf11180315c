#include <filesystem>

#include "doctest.h"
#include "occm/common.hpp"
#include "occm/image_io.hpp"

using namespace occm;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "occm_image_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("ppm roundtrip preserves every pixel") {
  Rng rng(11);
  RasterImage img(17, 9);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const auto path = tmp_file("rt.ppm");
  write_ppm(img, path.string());
  const RasterImage back = read_ppm(path.string());
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("pgm roundtrip preserves the mask") {
  Rng rng(12);
  BinaryMask mask(13, 21);
  for (auto& b : mask.bits) b = static_cast<std::uint8_t>(rng.below(2));
  const auto path = tmp_file("rt.pgm");
  write_pgm(mask, path.string());
  const BinaryMask back = read_pgm(path.string());
  CHECK(back.width == mask.width);
  CHECK(back.height == mask.height);
  CHECK(back.bits == mask.bits);
}

TEST_CASE("reading a missing file reports the path") {
  CHECK_THROWS_AS(read_ppm("/nonexistent/abc.ppm"), IoError);
  CHECK_THROWS_AS(read_pgm("/nonexistent/abc.pgm"), IoError);
}

TEST_CASE("resize to the same side is the identity") {
  Rng rng(13);
  RasterImage img(16, 16);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const RasterImage out = resize_image(img, 16);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("2x2 checkerboard downsamples to 128 with round-half-up") {
  RasterImage img(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const std::uint8_t v = ((x + y) % 2 == 0) ? 0 : 255;
      auto* p = img.at(x, y);
      p[0] = p[1] = p[2] = v;
    }
  const RasterImage out = resize_image(img, 1);
  REQUIRE(out.width == 1);
  CHECK(out.at(0, 0)[0] == 128);
  CHECK(out.at(0, 0)[1] == 128);
  CHECK(out.at(0, 0)[2] == 128);
}

TEST_CASE("square in, square out") {
  const RasterImage out = resize_image(RasterImage(32, 32), 7);
  CHECK(out.width == 7);
  CHECK(out.height == 7);
}
