#include "svs/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace svs {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'C', 'K'};

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    std::reverse(b, b + sizeof(U));
    std::memcpy(&v, b, sizeof(U));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  }
  void u32(std::uint32_t v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void f32(float v) {
    std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
    out_.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw CheckpointError("write failed: " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("cannot open checkpoint: " + path.string());
  }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("truncated checkpoint: " + path_.string());
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(reinterpret_cast<char*>(&v), sizeof v);
    return to_little(v);
  }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 20)) throw CheckpointError("implausible string length in " + path_.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
Checkpoint make_checkpoint(std::string model, const NamedTensors<T>& tensors) {
  Checkpoint ckpt{std::move(model), {}};
  for (const auto& [name, t] : tensors) {
    CheckpointEntry e{name, t.shape(), std::vector<float>(t.numel())};
    for (Index i = 0; i < t.numel(); ++i) e.values[i] = static_cast<float>(t[i]);
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  Writer w(path);
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ckpt.model);
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (Index d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.values) w.f32(v);
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic): " + path.string());
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " +
                          path.string());
  }
  Checkpoint ckpt;
  ckpt.model = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw CheckpointError("implausible rank for " + e.name + " in " + path.string());
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.u32());
    e.values.resize(numel(e.shape));
    for (auto& v : e.values) v = r.f32();
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

template <typename T>
void restore_tensors(const Checkpoint& ckpt, const std::string& expected_model,
                     NamedTensors<T>& tensors) {
  if (ckpt.model != expected_model) {
    throw CheckpointError("checkpoint holds model '" + ckpt.model + "', expected '" +
                          expected_model + "'");
  }
  for (auto& [name, t] : tensors) {
    const auto* e = ckpt.find(name);
    if (!e) throw CheckpointError("checkpoint lacks entry '" + name + "'");
    if (e->shape != t.shape()) {
      throw ShapeError("checkpoint entry '" + name + "' has shape " + to_string(e->shape) +
                       ", model expects " + to_string(t.shape()));
    }
    for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(e->values[i]);
  }
}

template Checkpoint make_checkpoint(std::string, const NamedTensors<float>&);
template Checkpoint make_checkpoint(std::string, const NamedTensors<double>&);
template void restore_tensors(const Checkpoint&, const std::string&, NamedTensors<float>&);
template void restore_tensors(const Checkpoint&, const std::string&, NamedTensors<double>&);

}  // namespace svs
