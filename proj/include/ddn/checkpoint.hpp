#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddn/model.hpp"

namespace ddn {

/// Checkpoint layout (all integers little-endian):
///
///   magic        8 bytes  "DDNCKPT\0"
///   version      u32      kCheckpointVersion
///   config       u32 variant, input_channels, base_channels, pairs,
///                    growth_rate, block_layers, dncnn_depth,
///                    skip_to_transitions; f64 trained_sigma
///   count        u32      number of tensors
///   tensor[i]    u32 name length, name bytes, u32 rank, u32 extents[rank],
///                f32 values[numel]
///   checksum     u64      FNV-1a of every preceding byte
///
/// Tensors appear in the network's parameter order followed by its buffers
/// (batch-norm running statistics).
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Network<float>& net);
/// Throws FormatError (bad_magic, truncated, version_mismatch, corrupt,
/// shape_mismatch); never returns a partially populated network.
Network<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the serialized checkpoint, as 16 hex digits.
std::string checkpoint_hash(const Network<float>& net);

}  // namespace ddn
