// Microbenchmarks for the hot paths: field sampling + meshing, rasterization,
// patch encoding and a full language-model forward pass.

#include <benchmark/benchmark.h>

#include "occm/lm.hpp"
#include "occm/mesh.hpp"
#include "occm/render.hpp"
#include "occm/vision.hpp"

namespace {

using namespace occm;

AnalyticShape bench_sphere() {
  AnalyticShape s;
  s.kind = ShapeKind::sphere;
  s.params = {0.5, 0, 0};
  return s;
}

void BM_MarchingCubes(benchmark::State& state) {
  const AnalyticShape sphere = bench_sphere();
  const int res = static_cast<int>(state.range(0));
  const SdfGrid grid =
      sample_grid([&](const Point3& p) { return analytic_sdf(sphere, p); }, res);
  for (auto _ : state) {
    Mesh mesh = marching_cubes(grid);
    benchmark::DoNotOptimize(mesh.vertices.data());
  }
}
BENCHMARK(BM_MarchingCubes)->Arg(33)->Arg(65);

void BM_Rasterize(benchmark::State& state) {
  const AnalyticShape sphere = bench_sphere();
  const SdfGrid grid =
      sample_grid([&](const Point3& p) { return analytic_sdf(sphere, p); }, 33);
  const Mesh mesh = marching_cubes(grid);
  Camera cam;
  cam.width = cam.height = static_cast<int>(state.range(0));
  for (auto _ : state) {
    RasterImage img = project_mesh(mesh, cam, Shading::depth);
    benchmark::DoNotOptimize(img.pixels.data());
  }
}
BENCHMARK(BM_Rasterize)->Arg(64)->Arg(224);

void BM_PatchEncode(benchmark::State& state) {
  Rng rng(1);
  PatchEncoder encoder(PatchEncoderConfig{}, rng);
  RasterImage img(64, 64);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  for (auto _ : state) {
    VisualTokenSequence tokens = encoder.encode(img, TokenSource::occluded_rgb);
    benchmark::DoNotOptimize(tokens.tokens.data());
  }
}
BENCHMARK(BM_PatchEncode);

void BM_LmForward(benchmark::State& state) {
  Rng rng(2);
  LmConfig cfg;
  LmParams params(cfg, rng);
  VisualTokenSequence fused;
  fused.count = 16;
  fused.dim = cfg.visual_dim;
  fused.tokens.resize(static_cast<std::size_t>(fused.count) * fused.dim);
  for (double& v : fused.tokens) v = rng.normal(0, 0.5);
  const std::vector<double> visual = map_visual(fused, params);
  const std::vector<int> text = tokenize("What's the object in the hand?\n");
  const InputSequence input = build_input(visual, fused.count, text, params);
  for (auto _ : state) {
    std::vector<double> h = lm_forward(input, params);
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(BM_LmForward);

}  // namespace

BENCHMARK_MAIN();
