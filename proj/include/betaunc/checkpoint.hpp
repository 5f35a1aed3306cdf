#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "betaunc/network.hpp"

namespace betaunc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (little-endian):
//   "BGC1" | u32 version | u32 len + UTF-8 JSON header | u32 entry count |
//   entries: u32 len + name | u32 rank | rank x u32 dims | f32 payload
// The JSON header holds the architecture spec, model options, seed and the
// training metadata (Adam step count and config echo).

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
/// Throws DataError: MissingFile, CorruptCheckpoint, UnsupportedVersion or ShapeMismatch.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace betaunc
