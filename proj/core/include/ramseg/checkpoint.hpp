#ifndef RAMSEG_CHECKPOINT_HPP
#define RAMSEG_CHECKPOINT_HPP

#include <filesystem>
#include <vector>

#include "ramseg/model.hpp"

namespace ramseg {

// Checkpoint container format, little-endian throughout:
//   magic "RSEGCKPT" (8 bytes)
//   u32 version (currently 1)
//   u64 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 payload[numel]
// Entries are written in the order given, so model checkpoints are
// byte-reproducible.

void save_checkpoint(const std::filesystem::path& path, const std::vector<TensorRef>& entries);

/// Loads into the given tensors, matching by name; every entry must be
/// present in the file with an identical shape.
void load_checkpoint(const std::filesystem::path& path, const std::vector<TensorRef>& entries);

void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

}  // namespace ramseg

#endif
