#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctadapt/model.hpp"

namespace ctadapt {

enum class TrainingStage : std::uint8_t { Fresh = 0, PostPretext = 1, PostTransfer = 2 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    ClassifierModel model;
    TrainingStage training_stage = TrainingStage::Fresh;
    std::string rng_state;
};

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b);

// Layout, all integers and floats little-endian:
//   "DLCK"  u32 version  u8 stage
//   u32 input_side  u32 conv_blocks  f32 dropout_rate  f32 weight_decay
//   u32 tensor_count, then per tensor in parameters() order:
//     u32 rank  u32 dims[rank]  u64 element_count  f32 data[element_count]
//   u32 rng_state_length  bytes rng_state
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws UnsupportedVersionError or CorruptCheckpointError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

const char* to_string(TrainingStage stage);

}  // namespace ctadapt
