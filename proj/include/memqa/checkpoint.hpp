#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "memqa/training.hpp"

namespace memqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "MEMQACK1", u32 version, u32 crc32 of the rest, u64 metadata
// length, JSON metadata, then every tensor of params, current, adam.m and
// adam.v as little-endian f64 in declaration order.
std::string SerializeCheckpoint(const Checkpoint& ckpt);
// Throws DataError on bad magic, unsupported version, truncation or a
// checksum mismatch; nothing is returned on failure.
Checkpoint DeserializeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace memqa
