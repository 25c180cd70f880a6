#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vaguegan/config.hpp"
#include "vaguegan/training.hpp"

// Checkpoint archive, format version 1 (all integers and doubles little-endian):
//
//   char[8]  magic "VGANCKPT"
//   u32      format version
//   str      config JSON (canonical text)      str = u64 byte length + bytes
//   str      config hash (git-style sha1 hex)
//   i64      completed epochs
//   str      random stream state
//   3 x network block, in order generator, discriminator, poisoner:
//     u8 network id, u32 image side, u32 tensor count,
//     per tensor: str name, u32 rank, u32 dims[rank], f64 values[prod(dims)]
//   3 x optimizer block, same network order:
//     i64 step count, then first moments and second moments as f64 arrays in
//     the parameter order of the matching network block
//   u64      epoch record count, per record:
//     i64 epoch, f64 loss_d, f64 loss_g, f64 loss_p, u8 poisoned, f64 lr
//   char[4]  trailer "END."
namespace vaguegan::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
  train::TrainingConfig config;
  std::string config_hash;
  train::TrainState state;
};

// Writes atomically (temporary file + rename). Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const train::TrainingConfig& cfg,
                     const train::TrainState& state);

// Throws MissingFileError or CheckpointError on a truncated/corrupt archive.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vaguegan::ckpt
