#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mdsnet/rng.hpp"
#include "mdsnet/tensor.hpp"

namespace mdsnet {

enum class VolumeKind { image, label, probability };
enum class ViewAxis { axial, coronal, sagittal };
enum class AugmentOp { rotate90, hflip, vflip };

std::string to_string(VolumeKind kind);
std::string to_string(ViewAxis axis);
VolumeKind volume_kind_from_string(const std::string& s);
ViewAxis view_axis_from_string(const std::string& s);

// 3D scalar grid, depth x length x width, row-major with slices outermost.
struct Volume {
    std::size_t d = 0, l = 0, w = 0;
    VolumeKind kind = VolumeKind::image;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    bool has_spacing = false;
    std::vector<double> voxels;

    Volume() = default;
    Volume(std::size_t d_, std::size_t l_, std::size_t w_, VolumeKind kind_);

    std::size_t size() const { return voxels.size(); }
    double& at(std::size_t z, std::size_t y, std::size_t x) { return voxels[(z * l + y) * w + x]; }
    double at(std::size_t z, std::size_t y, std::size_t x) const {
        return voxels[(z * l + y) * w + x];
    }

    // Enforces the kind invariants: labels in {0,1}, probabilities in [0,1].
    void validate() const;
};

// Where each k-slice stack starts. Coverage of [0, d) is total; when d is not
// a multiple of k the final stack is anchored at d - k and overlaps its
// predecessor.
struct StackPlan {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<std::size_t> starts;

    std::size_t count() const { return starts.size(); }
};

StackPlan plan_stacks(std::size_t depth, std::size_t k);

// Copies stack i of the plan into a k x l x w tensor.
Tensor extract_stack(const Volume& volume, const StackPlan& plan, std::size_t i);

// Reassembles a volume from per-stack tensors, averaging slices that are
// covered by more than one stack.
Volume merge_stacks(const std::vector<Tensor>& stacks, const StackPlan& plan, VolumeKind kind);

// Axis permutations putting the chosen view's slice axis outermost.
// axial is the identity; coronal swaps depth/length; sagittal cycles
// (d,l,w) -> (w,d,l). inverse_transpose_view undoes the same permutation.
Volume transpose_view(const Volume& volume, ViewAxis axis);
Volume inverse_transpose_view(const Volume& volume, ViewAxis axis);

// In-plane crop to target_l x target_w around the given center, clamped to
// bounds. Depth is untouched.
Volume crop_to(const Volume& volume, std::size_t target_l, std::size_t target_w,
               std::size_t center_y, std::size_t center_x);

// In-plane center of the label's foreground bounding box; volume center when
// the label is empty.
std::pair<std::size_t, std::size_t> label_center(const Volume& label);

// Applies the same in-plane transform to an image stack and its label stack.
// rotate90 is a quarter turn and swaps the in-plane extents.
void augment(Tensor& stack, Tensor& label, AugmentOp op);

}  // namespace mdsnet
