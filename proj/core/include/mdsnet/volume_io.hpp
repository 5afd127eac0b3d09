#pragma once

#include <filesystem>
#include <string>

#include "mdsnet/volume.hpp"

namespace mdsnet {

// On-disk volume format: a text header (.hdr) next to a raw little-endian
// voxel blob. dtype u8 is reserved for label volumes; everything else is f32.
//
//   mdsnet-volume 1
//   dims: 32 64 64
//   dtype: f32
//   order: d,l,w
//   kind: image
//   spacing: 1 1 1          (optional)
//   data: case_000_image.raw

enum class VolumeDtype { u8, f32 };

std::string to_string(VolumeDtype dtype);
VolumeDtype volume_dtype_from_string(const std::string& s);

// Picks u8 for labels, f32 otherwise.
VolumeDtype default_dtype(VolumeKind kind);

void save_volume(const std::filesystem::path& header_path, const Volume& volume,
                 VolumeDtype dtype);
void save_volume(const std::filesystem::path& header_path, const Volume& volume);

Volume load_volume(const std::filesystem::path& header_path);

}  // namespace mdsnet
