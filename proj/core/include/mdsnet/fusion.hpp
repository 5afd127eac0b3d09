#pragma once

#include <vector>

#include "mdsnet/volume.hpp"

namespace mdsnet {

// Multi-view vote: the three probability maps, already aligned to the axial
// frame, are averaged voxelwise and thresholded.
struct FusedPrediction {
    Volume prob_axial, prob_coronal, prob_sagittal;
    Volume mean_prob;  // elementwise mean of the three maps
    Volume mask;       // mean_prob >= thr
    double thr = 0.5;
};

FusedPrediction fuse_views(const Volume& prob_axial, const Volume& prob_coronal,
                           const Volume& prob_sagittal, double thr = 0.5);

// Mean of an arbitrary nonempty set of aligned probability maps (single-view
// pipelines pass one map and fusion degenerates to the identity).
Volume fuse_mean(const std::vector<const Volume*>& probs);

Volume threshold_mask(const Volume& prob, double thr);

}  // namespace mdsnet
