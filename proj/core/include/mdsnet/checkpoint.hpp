#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdsnet/tensor.hpp"

namespace mdsnet {

// A checkpoint is a text manifest plus a little-endian f64 blob holding all
// parameter buffers followed by the momentum buffers. Round-trips bit-exactly.
//
//   mdsnet-checkpoint 1
//   kind: stack-unet
//   dtype: f64
//   blob: model.ckpt.bin
//   config: depth=4 k=7 ...
//   buffers: N
//   buffer: <name> <rank> <extents...> <param_offset> <momentum_offset|->

struct CheckpointEntry {
    std::string name;
    const Tensor* value = nullptr;
    const Tensor* momentum = nullptr;  // null for non-trainable state
};

struct CheckpointSlot {
    std::string name;
    Tensor* value = nullptr;
    Tensor* momentum = nullptr;
};

struct CheckpointInfo {
    std::string kind;
    std::map<std::string, std::string> config;
};

void save_checkpoint(const std::filesystem::path& manifest_path, const std::string& kind,
                     const std::map<std::string, std::string>& config,
                     const std::vector<CheckpointEntry>& entries);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& manifest_path);

// Fills the slots; names, shapes, and kind must match the manifest exactly.
void load_checkpoint(const std::filesystem::path& manifest_path, const std::string& expected_kind,
                     const std::vector<CheckpointSlot>& slots);

}  // namespace mdsnet
