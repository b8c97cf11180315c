#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "occm/checkpoint.hpp"

using namespace occm;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "occm_checkpoint_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.meta_json = "{\"stages\":[\"sdf1\"]}";
  Rng rng(81);
  Tensor a("model.w", {3, 4});
  a.init_normal(rng, 1.0);
  Tensor b("model.b", {4});
  b.init_normal(rng, 1.0);
  ck.put(a.name, a);
  ck.put(b.name, b);
  return ck;
}

}  // namespace

TEST_CASE("checkpoint save/load/save is byte identical") {
  const Checkpoint ck = sample_checkpoint();
  const auto p1 = tmp_file("a.ckpt");
  const auto p2 = tmp_file("b.ckpt");
  save_checkpoint(ck, p1.string());
  const Checkpoint back = load_checkpoint(p1.string());
  save_checkpoint(back, p2.string());
  CHECK(file_bytes(p1) == file_bytes(p2));
  CHECK(back.meta_json == ck.meta_json);
}

TEST_CASE("checkpoint files start with the magic") {
  const auto p = tmp_file("magic.ckpt");
  save_checkpoint(sample_checkpoint(), p.string());
  CHECK(file_bytes(p).substr(0, 4) == "OCCM");
}

TEST_CASE("loading restores values at float precision") {
  const Checkpoint ck = sample_checkpoint();
  const auto p = tmp_file("prec.ckpt");
  save_checkpoint(ck, p.string());
  const Checkpoint back = load_checkpoint(p.string());
  const auto& orig = ck.segments.at("model.w").data;
  const auto& read = back.segments.at("model.w").data;
  REQUIRE(read.size() == orig.size());
  for (std::size_t i = 0; i < read.size(); ++i)
    CHECK(read[i] == doctest::Approx(orig[i]).epsilon(1e-6));
}

TEST_CASE("missing segments and shape mismatches are load errors") {
  const Checkpoint ck = sample_checkpoint();
  Tensor t("model.missing", {2, 2});
  CHECK_THROWS_AS(ck.get("model.missing", t), IoError);
  Tensor wrong("model.w", {4, 4});
  CHECK_THROWS_AS(ck.get("model.w", wrong), IoError);
}

TEST_CASE("corrupt files are rejected") {
  const auto p = tmp_file("corrupt.ckpt");

  {
    std::ofstream out(p, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(p.string()), IoError);

  const auto good = tmp_file("good.ckpt");
  save_checkpoint(sample_checkpoint(), good.string());
  const std::string bytes = file_bytes(good);
  {
    std::ofstream out(p, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(p.string()), IoError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST_CASE("put_all/get_all roundtrip named tensors") {
  Rng rng(82);
  Tensor a("layer.w", {2, 2}), b("layer.b", {2});
  a.init_normal(rng, 1.0);
  b.init_normal(rng, 1.0);
  Checkpoint ck;
  ck.put_all("", {&a, &b});

  Tensor a2("layer.w", {2, 2}), b2("layer.b", {2});
  ck.get_all({&a2, &b2});
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a2.value[i] == doctest::Approx(a.value[i]).epsilon(1e-6));
}
