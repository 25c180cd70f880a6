#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace vaguegan::io {

enum class NpyType { kFloat32, kFloat64 };

// Minimal NumPy .npy (format 1.0, C order, little-endian) support.
void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               std::span<const double> values, NpyType type = NpyType::kFloat64);

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

NpyArray read_npy(const std::filesystem::path& path);

}  // namespace vaguegan::io
