#include "doctest.h"
#include "occm/mlp.hpp"

using namespace occm;

TEST_CASE("zero-weight mlp outputs the last-layer bias") {
  Rng rng(3);
  Mlp net("toy", {4, 8, 2}, rng);
  for (Tensor* t : net.params()) t->fill(0.0);
  net.biases.back().value = {0.7, -0.3};
  const auto y = net.forward({1.0, 2.0, 3.0, 4.0});
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(0.7));
  CHECK(y[1] == doctest::Approx(-0.3));
}

TEST_CASE("mlp forward is deterministic") {
  Rng rng(4);
  Mlp net("toy", {3, 6, 6, 1}, rng);
  const std::vector<double> x = {0.1, -0.2, 0.3};
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("zero-weight sdf decoder outputs its bias everywhere") {
  Rng rng(5);
  SdfDecoder dec(SdfRole::object, 4, 16, 64, 3, rng);
  for (Tensor* t : dec.params()) t->fill(0.0);
  dec.net.biases.back().value = {0.42};
  Tensor latent("z", {16});
  latent.fill(0.3);
  CHECK(dec.eval({0.1, 0.2, 0.3}, latent) == doctest::Approx(0.42));
  CHECK(dec.eval({-0.9, 0.0, 0.5}, latent) == doctest::Approx(0.42));
}

TEST_CASE("sdf decoder eval matches the training-path forward") {
  Rng rng(6);
  SdfDecoder dec(SdfRole::subject, 4, 16, 32, 2, rng);
  Tensor latent("z", {16});
  latent.init_normal(rng, 0.5);
  const Point3 p{0.2, -0.4, 0.6};
  Mlp::Cache cache;
  CHECK(dec.eval(p, latent) == doctest::Approx(dec.forward(p, latent, cache)));
}

TEST_CASE("sdf decoder input dims follow the band and latent configuration") {
  Rng rng(7);
  SdfDecoder dec(SdfRole::object, 4, 16, 64, 3, rng);
  CHECK(dec.feature_dim() == 27);
  CHECK(dec.input_dim() == 43);
  CHECK(dec.net.dims.front() == 43);
  CHECK(dec.net.dims.back() == 1);
}

TEST_CASE("mlp backward accumulates a nonzero input gradient") {
  Rng rng(8);
  Mlp net("toy", {2, 4, 1}, rng);
  Mlp::Cache cache;
  net.forward({0.5, -0.5}, &cache);
  std::vector<double> dx(2, 0.0);
  net.backward(cache, {1.0}, &dx);
  CHECK((dx[0] != 0.0 || dx[1] != 0.0));
}
