#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aiqn/train.hpp"

namespace aiqn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian): "AIQN", u32 version, u64 metadata length,
/// metadata text (sorted `key=value` lines), u64 tensor count, then per
/// tensor: u32 name length, name, u32 rank, u64 dims, f64 payload.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aiqn
