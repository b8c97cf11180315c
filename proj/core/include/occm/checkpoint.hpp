#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "occm/common.hpp"

namespace occm {

// Single-file checkpoint: magic, format version, a free-form JSON metadata
// string, then named segments. Tensor payloads are float32 little-endian;
// shapes are preserved exactly. Writing then reading then writing again
// produces byte-identical files.
struct CheckpointSegment {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string meta_json = "{}";
  std::map<std::string, CheckpointSegment> segments;

  bool has(const std::string& name) const { return segments.count(name) != 0; }

  // Downcasts to float32.
  void put(const std::string& name, const Tensor& t);
  void put(const std::string& name, const std::vector<std::size_t>& shape,
           const std::vector<double>& values);

  // Throws IoError when the segment is missing or its shape differs from the
  // tensor's. Values are widened back to double; grads are untouched.
  void get(const std::string& name, Tensor& t) const;
  std::vector<double> get_values(const std::string& name) const;
  const CheckpointSegment& segment(const std::string& name) const;

  void put_all(const std::string& prefix, const std::vector<const Tensor*>& tensors);
  void get_all(const std::vector<Tensor*>& tensors) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace occm
