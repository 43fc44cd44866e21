#pragma once

// Binary network checkpoints.
//
// Layout (little-endian):
//   "IKHM" | u32 version=1 | u32 layer_count |
//   per layer: u32 in_dim | u32 out_dim | u8 activation | f32[out*in] weights (row-major) | f32[out] biases

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ikh/net.hpp"

namespace ikh::net {

inline constexpr char kCheckpointMagic[4] = {'I', 'K', 'H', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Mlp& net);
Mlp decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace ikh::net
