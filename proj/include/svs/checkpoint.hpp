#pragma once

// Versioned binary checkpoint container.
//
// Layout (all integers little-endian):
//   "SVCK"                      4-byte magic
//   u32 version                 currently 1
//   u32 len, bytes              model name, e.g. "depthnet-v1"
//   u32 count                   number of entries
//   count x {
//     u32 len, bytes            entry name, e.g. "res_1.conv_a.weight"
//     u32 rank, rank x u32      shape
//     numel x f32               raw values
//   }

#include "svs/layers.hpp"

#include <filesystem>
#include <optional>

namespace svs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string model;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

template <typename T>
Checkpoint make_checkpoint(std::string model, const NamedTensors<T>& tensors);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into the given tensors by name. Throws
/// CheckpointError when the model name differs or an entry is missing, and
/// ShapeError when an entry has the wrong shape.
template <typename T>
void restore_tensors(const Checkpoint& ckpt, const std::string& expected_model,
                     NamedTensors<T>& tensors);

}  // namespace svs
