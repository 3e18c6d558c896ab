#ifndef RAMSEG_DATASET_IO_HPP
#define RAMSEG_DATASET_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ramseg/synthdata.hpp"

namespace ramseg {

// On-disk layout:
//   root/meta.txt          benchmark parameters (key=value)
//   root/manifest.txt      one line per image: "<relpath>\t<domain>\t<split>"
//   root/domain<k>/img_###.pgm            single-channel images (8-bit PGM)
//   root/domain<k>/img_###.rten           multi-channel images (raw tensor)
//   root/domain<k>/lbl_###_c<c>.pgm       one bitmask per class channel
// Label paths derive from the image path listed in the manifest.

void write_pgm(const std::filesystem::path& path, const Tensor& plane, double lo, double hi);
Tensor read_pgm(const std::filesystem::path& path, double lo, double hi);

void save_benchmark(const Benchmark& bench, const std::filesystem::path& root);

/// Reload a saved benchmark. only_domains restricts which domains are read
/// (their files are never opened otherwise); audit, when provided, records
/// every file path this call opens.
Benchmark load_benchmark(const std::filesystem::path& root,
                         const std::optional<std::vector<int>>& only_domains = std::nullopt,
                         std::vector<std::string>* audit = nullptr);

}  // namespace ramseg

#endif
