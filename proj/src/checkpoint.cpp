#include "dbdn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dbdn {

namespace {

constexpr std::uint32_t kPrependFlag = 1u << 8;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint32_t> logical_dims(const NamedParameter& p) {
  const Shape s = p.tensor.shape();
  if (p.rank == 1) return {static_cast<std::uint32_t>(s.n)};
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

}  // namespace

std::vector<std::uint8_t> serialize_network(const Network& net) {
  const ModelConfig& cfg = net.config;
  Writer w;
  w.raw("DBDN", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.variant) | (cfg.prepend_extraction ? kPrependFlag : 0u));
  w.u32(static_cast<std::uint32_t>(cfg.blocks));
  w.u32(static_cast<std::uint32_t>(cfg.layers));
  w.u32(static_cast<std::uint32_t>(cfg.n_r));
  w.u32(static_cast<std::uint32_t>(cfg.n_g));
  w.u32(static_cast<std::uint32_t>(cfg.scale));
  for (const NamedParameter& p : net.parameters()) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name.data(), p.name.size());
    const auto dims = logical_dims(p);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) w.u32(d);
    for (float v : p.tensor.data()) w.f32(v);
  }
  return w.take();
}

Network deserialize_network(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != "DBDN") throw CheckpointError("bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  const std::uint32_t tag = r.u32();
  if ((tag & 0xffu) > 3 || (tag & ~(0xffu | kPrependFlag)) != 0) {
    throw CheckpointError("bad variant tag " + std::to_string(tag));
  }
  cfg.variant = static_cast<Variant>(tag & 0xffu);
  cfg.prepend_extraction = (tag & kPrependFlag) != 0;
  cfg.blocks = static_cast<int>(r.u32());
  cfg.layers = static_cast<int>(r.u32());
  cfg.n_r = static_cast<int>(r.u32());
  cfg.n_g = static_cast<int>(r.u32());
  cfg.scale = static_cast<int>(r.u32());
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }

  Network net = build_network(cfg, 0);
  for (NamedParameter& p : net.parameters()) {
    const std::string name = r.str(r.u32());
    if (name != p.name) {
      throw CheckpointError("expected tensor '" + p.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = r.u32();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    if (dims != logical_dims(p)) {
      throw CheckpointError("shape mismatch for '" + name + "'");
    }
    for (float& v : p.tensor.data_mut()) v = r.f32();
  }
  if (!r.done()) throw CheckpointError("trailing bytes after last tensor");
  return net;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_network(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return deserialize_network(read_file_bytes(path));
}

}  // namespace dbdn
