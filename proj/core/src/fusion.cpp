#include "mdsnet/fusion.hpp"
#include <algorithm>


#include "mdsnet/error.hpp"

namespace mdsnet {

Volume fuse_mean(const std::vector<const Volume*>& probs) {
    require(!probs.empty(), "fuse: no probability maps given");
    const Volume& first = *probs[0];
    for (const Volume* p : probs) {
        require(p->d == first.d && p->l == first.l && p->w == first.w,
                "fuse: probability map dims mismatch, ", p->d, "x", p->l, "x", p->w, " vs ",
                first.d, "x", first.l, "x", first.w);
    }
    Volume mean(first.d, first.l, first.w, VolumeKind::probability);
    mean.has_spacing = first.has_spacing;
    mean.spacing = first.spacing;
    // Summing in sorted order makes the mean bitwise invariant under any
    // permutation of the input maps.
    std::vector<double> vals(probs.size());
    const double inv = 1.0 / static_cast<double>(probs.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        for (std::size_t m = 0; m < probs.size(); ++m) vals[m] = probs[m]->voxels[i];
        std::sort(vals.begin(), vals.end());
        double s = 0.0;
        for (double v : vals) s += v;
        mean.voxels[i] = s * inv;
    }
    return mean;
}

Volume threshold_mask(const Volume& prob, double thr) {
    Volume mask(prob.d, prob.l, prob.w, VolumeKind::label);
    mask.has_spacing = prob.has_spacing;
    mask.spacing = prob.spacing;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        mask.voxels[i] = prob.voxels[i] >= thr ? 1.0 : 0.0;
    }
    return mask;
}

FusedPrediction fuse_views(const Volume& prob_axial, const Volume& prob_coronal,
                           const Volume& prob_sagittal, double thr) {
    require(thr > 0.0 && thr < 1.0, "fuse: threshold must lie in (0,1), got ", thr);
    FusedPrediction fused;
    fused.prob_axial = prob_axial;
    fused.prob_coronal = prob_coronal;
    fused.prob_sagittal = prob_sagittal;
    fused.mean_prob = fuse_mean({&prob_axial, &prob_coronal, &prob_sagittal});
    fused.mask = threshold_mask(fused.mean_prob, thr);
    fused.thr = thr;
    return fused;
}

}  // namespace mdsnet
