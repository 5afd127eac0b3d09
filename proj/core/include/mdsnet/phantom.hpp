#pragma once

#include <cstdint>
#include <utility>

#include "mdsnet/volume.hpp"

namespace mdsnet {

// Procedural stand-in for an abdominal scan: an ellipsoid swept along the
// slice axis whose in-plane radii, orientation, and center drift from slice
// to slice, on top of textured background and low-contrast distractor blobs.
// shape_variability scales every per-slice deviation; 0 gives an identical
// cross-section on every slice. Deterministic in (seed, dims, variability).
//
// Returns (image, label); the image is min-max normalized to [0, 1].
std::pair<Volume, Volume> generate_phantom(std::uint64_t seed, std::size_t d, std::size_t l,
                                           std::size_t w, double shape_variability = 0.5);

}  // namespace mdsnet
