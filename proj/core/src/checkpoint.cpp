#include "occm/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace occm {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'C', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("truncated checkpoint: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
  CheckpointSegment seg;
  seg.shape = t.shape;
  seg.data.assign(t.value.begin(), t.value.end());
  segments[name] = std::move(seg);
}

void Checkpoint::put(const std::string& name, const std::vector<std::size_t>& shape,
                     const std::vector<double>& values) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != values.size())
    throw ShapeError("checkpoint segment " + name + ": shape does not match value count");
  CheckpointSegment seg;
  seg.shape = shape;
  seg.data.assign(values.begin(), values.end());
  segments[name] = std::move(seg);
}

const CheckpointSegment& Checkpoint::segment(const std::string& name) const {
  auto it = segments.find(name);
  if (it == segments.end()) throw IoError("checkpoint has no segment named " + name);
  return it->second;
}

void Checkpoint::get(const std::string& name, Tensor& t) const {
  const CheckpointSegment& seg = segment(name);
  if (seg.shape != t.shape)
    throw IoError("checkpoint segment " + name + ": stored shape differs from expected");
  t.value.assign(seg.data.begin(), seg.data.end());
}

std::vector<double> Checkpoint::get_values(const std::string& name) const {
  const CheckpointSegment& seg = segment(name);
  return std::vector<double>(seg.data.begin(), seg.data.end());
}

void Checkpoint::put_all(const std::string& prefix, const std::vector<const Tensor*>& tensors) {
  for (const Tensor* t : tensors) put(prefix + t->name, *t);
}

void Checkpoint::get_all(const std::vector<Tensor*>& tensors) const {
  for (Tensor* t : tensors) get(t->name, *t);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, ckpt.meta_json.size());
  out += ckpt.meta_json;
  put_u32(out, static_cast<std::uint32_t>(ckpt.segments.size()));
  for (const auto& [name, seg] : ckpt.segments) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(seg.shape.size()));
    for (std::size_t d : seg.shape) put_u64(out, d);
    put_u64(out, seg.data.size());
    static_assert(sizeof(float) == 4);
    for (float f : seg.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  if (r.bytes(4) != std::string(kMagic, 4)) throw IoError("bad checkpoint magic: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

  Checkpoint ckpt;
  const std::uint64_t meta_len = r.u64();
  ckpt.meta_json = r.bytes(meta_len);
  const std::uint32_t n_segments = r.u32();
  for (std::uint32_t s = 0; s < n_segments; ++s) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    CheckpointSegment seg;
    const std::uint32_t rank = r.u32();
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      seg.shape.push_back(r.u64());
      count *= seg.shape.back();
    }
    const std::uint64_t n = r.u64();
    if (n != count)
      throw IoError("checkpoint segment " + name + ": element count disagrees with shape");
    seg.data.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint32_t bits = r.u32();
      std::memcpy(&seg.data[i], &bits, 4);
    }
    ckpt.segments[name] = std::move(seg);
  }
  if (r.pos != buf.size()) throw IoError("trailing bytes in checkpoint: " + path);
  return ckpt;
}

}  // namespace occm
