#include <cmath>

#include "doctest.h"
#include "occm/vision.hpp"

using namespace occm;

namespace {

VisualTokenSequence seq(int count, int dim, std::vector<double> vals) {
  VisualTokenSequence s;
  s.count = count;
  s.dim = dim;
  s.tokens = std::move(vals);
  return s;
}

}  // namespace

TEST_CASE("all-black image through a zero-bias linear encoder gives zero tokens") {
  Rng rng(31);
  PatchEncoderConfig cfg;
  cfg.attention = false;
  PatchEncoder enc(cfg, rng);
  enc.bias.fill(0.0);
  const VisualTokenSequence tokens =
      enc.encode(RasterImage(cfg.image_side, cfg.image_side), TokenSource::occluded_rgb);
  REQUIRE(tokens.count == 16);
  REQUIRE(tokens.dim == 64);
  for (double v : tokens.tokens) CHECK(v == 0.0);
}

TEST_CASE("encoding is deterministic") {
  Rng rng(32);
  PatchEncoder enc(PatchEncoderConfig{}, rng);
  RasterImage img(64, 64);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>((i * 37) % 256);
  CHECK(enc.encode(img, TokenSource::occluded_rgb).tokens ==
        enc.encode(img, TokenSource::occluded_rgb).tokens);
}

TEST_CASE("without attention, a one-patch change touches only that token") {
  Rng rng(33);
  PatchEncoderConfig cfg;
  cfg.attention = false;
  PatchEncoder enc(cfg, rng);
  RasterImage a(64, 64), b(64, 64);
  // patch grid is 4x4; patch index 5 covers x in [16,32), y in [16,32)
  for (int y = 16; y < 32; ++y)
    for (int x = 16; x < 32; ++x) b.at(x, y)[0] = 200;
  const auto ta = enc.encode(a, TokenSource::occluded_rgb);
  const auto tb = enc.encode(b, TokenSource::occluded_rgb);
  for (int t = 0; t < ta.count; ++t) {
    double diff = 0.0;
    for (int d = 0; d < ta.dim; ++d) diff += std::abs(ta.row(t)[d] - tb.row(t)[d]);
    if (t == 5)
      CHECK(diff > 1e-9);
    else
      CHECK(diff == 0.0);
  }
}

TEST_CASE("fusion endpoints select the inputs exactly") {
  const auto x1 = seq(1, 2, {2, 4});
  const auto x2 = seq(1, 2, {7, 9});
  CHECK(fuse_tokens(x1, x2, 1.0).tokens == x1.tokens);
  CHECK(fuse_tokens(x1, x2, 0.0).tokens == x2.tokens);
}

TEST_CASE("fusion is the convex combination") {
  const auto fused = fuse_tokens(seq(1, 2, {4, 0}), seq(1, 2, {0, 4}), 0.25);
  CHECK(fused.tokens[0] == doctest::Approx(1.0));
  CHECK(fused.tokens[1] == doctest::Approx(3.0));
  CHECK(fused.source == TokenSource::fused);
}

TEST_CASE("fusion rejects mismatched shapes") {
  CHECK_THROWS_AS(fuse_tokens(seq(1, 2, {1, 2}), seq(2, 2, {1, 2, 3, 4}), 0.5), ShapeError);
}

TEST_CASE("zero-weight category head is uniform over categories") {
  Rng rng(34);
  CategoryHead head(8, {"a", "b", "c", "d"}, rng);
  head.w.fill(0.0);
  head.b.fill(0.0);
  const auto probs = head.classify(seq(2, 8, std::vector<double>(16, 0.3)));
  REQUIRE(probs.size() == 4);
  for (double p : probs) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("category probabilities sum to one") {
  Rng rng(35);
  CategoryHead head(8, {"a", "b", "c"}, rng);
  std::vector<double> vals(3 * 8);
  for (double& v : vals) v = rng.normal();
  const auto probs = head.classify(seq(3, 8, vals));
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-6);
}
