#include "mdsnet/volume.hpp"

#include <algorithm>

#include "mdsnet/error.hpp"

namespace mdsnet {

std::string to_string(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::image: return "image";
        case VolumeKind::label: return "label";
        case VolumeKind::probability: return "probability";
    }
    return "image";
}

std::string to_string(ViewAxis axis) {
    switch (axis) {
        case ViewAxis::axial: return "axial";
        case ViewAxis::coronal: return "coronal";
        case ViewAxis::sagittal: return "sagittal";
    }
    return "axial";
}

VolumeKind volume_kind_from_string(const std::string& s) {
    if (s == "image") return VolumeKind::image;
    if (s == "label") return VolumeKind::label;
    if (s == "probability") return VolumeKind::probability;
    fail("unknown volume kind: ", s);
}

ViewAxis view_axis_from_string(const std::string& s) {
    if (s == "axial") return ViewAxis::axial;
    if (s == "coronal") return ViewAxis::coronal;
    if (s == "sagittal") return ViewAxis::sagittal;
    fail("unknown view axis: ", s);
}

Volume::Volume(std::size_t d_, std::size_t l_, std::size_t w_, VolumeKind kind_)
    : d(d_), l(l_), w(w_), kind(kind_), voxels(d_ * l_ * w_, 0.0) {
    require(d_ > 0 && l_ > 0 && w_ > 0, "volume extents must be positive, got ", d_, "x", l_, "x",
            w_);
}

void Volume::validate() const {
    require(voxels.size() == d * l * w, "volume voxel count ", voxels.size(),
            " does not match dims ", d, "x", l, "x", w);
    if (kind == VolumeKind::label) {
        for (double v : voxels) {
            require(v == 0.0 || v == 1.0, "label volume contains non-binary value ", v);
        }
    } else if (kind == VolumeKind::probability) {
        for (double v : voxels) {
            require(v >= 0.0 && v <= 1.0, "probability volume contains out-of-range value ", v);
        }
    }
}

StackPlan plan_stacks(std::size_t depth, std::size_t k) {
    require(k >= 1, "stack size k must be >= 1");
    require(k <= depth, "stack size k=", k, " exceeds volume depth d=", depth);
    StackPlan plan;
    plan.k = k;
    plan.d = depth;
    for (std::size_t s = 0; s + k <= depth; s += k) plan.starts.push_back(s);
    if (depth % k != 0) plan.starts.push_back(depth - k);
    return plan;
}

Tensor extract_stack(const Volume& volume, const StackPlan& plan, std::size_t i) {
    require(i < plan.starts.size(), "stack index ", i, " out of range for plan with ",
            plan.starts.size(), " stacks");
    require(plan.d == volume.d, "stack plan depth ", plan.d, " does not match volume depth ",
            volume.d);
    const std::size_t start = plan.starts[i];
    Tensor stack({plan.k, volume.l, volume.w});
    const std::size_t slice = volume.l * volume.w;
    std::copy(volume.voxels.begin() + static_cast<std::ptrdiff_t>(start * slice),
              volume.voxels.begin() + static_cast<std::ptrdiff_t>((start + plan.k) * slice),
              stack.data());
    return stack;
}

Volume merge_stacks(const std::vector<Tensor>& stacks, const StackPlan& plan, VolumeKind kind) {
    require(stacks.size() == plan.starts.size(), "merge: ", stacks.size(), " stacks given, plan has ",
            plan.starts.size());
    require(!stacks.empty(), "merge: empty stack list");
    const Shape& s0 = stacks.front().shape();
    require(s0.size() == 3 && s0[0] == plan.k, "merge: stack 0 shape ", shape_to_string(s0),
            " does not match plan k=", plan.k);
    const std::size_t l = s0[1], w = s0[2];

    Volume out(plan.d, l, w, kind);
    std::vector<std::size_t> cover(plan.d, 0);
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        require(stacks[i].shape() == s0, "merge: stack ", i, " shape mismatch");
        const std::size_t start = plan.starts[i];
        require(start + plan.k <= plan.d, "merge: stack ", i, " exceeds plan depth");
        for (std::size_t z = 0; z < plan.k; ++z) cover[start + z] += 1;
        const double* src = stacks[i].data();
        double* dst = out.voxels.data() + start * l * w;
        for (std::size_t j = 0; j < plan.k * l * w; ++j) dst[j] += src[j];
    }
    const std::size_t slice = l * w;
    for (std::size_t z = 0; z < plan.d; ++z) {
        require(cover[z] >= 1, "merge: slice ", z, " not covered by any stack");
        if (cover[z] > 1) {
            const double inv = 1.0 / static_cast<double>(cover[z]);
            double* dst = out.voxels.data() + z * slice;
            for (std::size_t j = 0; j < slice; ++j) dst[j] *= inv;
        }
    }
    return out;
}

namespace {

Volume permuted(const Volume& v, std::size_t nd, std::size_t nl, std::size_t nw,
                const std::array<std::size_t, 3>& spacing_perm) {
    Volume out(nd, nl, nw, v.kind);
    out.has_spacing = v.has_spacing;
    out.spacing = {v.spacing[spacing_perm[0]], v.spacing[spacing_perm[1]],
                   v.spacing[spacing_perm[2]]};
    return out;
}

}  // namespace

Volume transpose_view(const Volume& v, ViewAxis axis) {
    if (axis == ViewAxis::axial) return v;
    if (axis == ViewAxis::coronal) {
        // (d, l, w) -> (l, d, w)
        Volume out = permuted(v, v.l, v.d, v.w, {1, 0, 2});
        for (std::size_t z = 0; z < v.d; ++z)
            for (std::size_t y = 0; y < v.l; ++y)
                for (std::size_t x = 0; x < v.w; ++x) out.at(y, z, x) = v.at(z, y, x);
        return out;
    }
    // sagittal: (d, l, w) -> (w, d, l)
    Volume out = permuted(v, v.w, v.d, v.l, {2, 0, 1});
    for (std::size_t z = 0; z < v.d; ++z)
        for (std::size_t y = 0; y < v.l; ++y)
            for (std::size_t x = 0; x < v.w; ++x) out.at(x, z, y) = v.at(z, y, x);
    return out;
}

Volume inverse_transpose_view(const Volume& v, ViewAxis axis) {
    if (axis == ViewAxis::axial) return v;
    if (axis == ViewAxis::coronal) return transpose_view(v, ViewAxis::coronal);
    // inverse of sagittal: (w, d, l) -> (d, l, w)
    Volume out = permuted(v, v.l, v.w, v.d, {1, 2, 0});
    for (std::size_t z = 0; z < v.d; ++z)
        for (std::size_t y = 0; y < v.l; ++y)
            for (std::size_t x = 0; x < v.w; ++x) out.at(y, x, z) = v.at(z, y, x);
    return out;
}

Volume crop_to(const Volume& v, std::size_t target_l, std::size_t target_w, std::size_t center_y,
               std::size_t center_x) {
    require(target_l >= 1 && target_w >= 1, "crop target extents must be positive");
    require(target_l <= v.l, "crop target length ", target_l, " exceeds volume length ", v.l);
    require(target_w <= v.w, "crop target width ", target_w, " exceeds volume width ", v.w);

    auto window = [](std::size_t center, std::size_t target, std::size_t extent) {
        std::size_t lo = center > target / 2 ? center - target / 2 : 0;
        lo = std::min(lo, extent - target);
        return lo;
    };
    const std::size_t y0 = window(center_y, target_l, v.l);
    const std::size_t x0 = window(center_x, target_w, v.w);

    Volume out(v.d, target_l, target_w, v.kind);
    out.has_spacing = v.has_spacing;
    out.spacing = v.spacing;
    for (std::size_t z = 0; z < v.d; ++z)
        for (std::size_t y = 0; y < target_l; ++y)
            for (std::size_t x = 0; x < target_w; ++x) out.at(z, y, x) = v.at(z, y0 + y, x0 + x);
    return out;
}

std::pair<std::size_t, std::size_t> label_center(const Volume& label) {
    std::size_t ymin = label.l, ymax = 0, xmin = label.w, xmax = 0;
    bool any = false;
    for (std::size_t z = 0; z < label.d; ++z) {
        for (std::size_t y = 0; y < label.l; ++y) {
            for (std::size_t x = 0; x < label.w; ++x) {
                if (label.at(z, y, x) != 0.0) {
                    any = true;
                    ymin = std::min(ymin, y);
                    ymax = std::max(ymax, y);
                    xmin = std::min(xmin, x);
                    xmax = std::max(xmax, x);
                }
            }
        }
    }
    if (!any) return {label.l / 2, label.w / 2};
    return {(ymin + ymax) / 2, (xmin + xmax) / 2};
}

namespace {

Tensor transform_stack(const Tensor& t, AugmentOp op) {
    const std::size_t c = t.extent(0), l = t.extent(1), w = t.extent(2);
    if (op == AugmentOp::hflip) {
        Tensor out({c, l, w});
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t y = 0; y < l; ++y)
                for (std::size_t x = 0; x < w; ++x) out.at(ci, y, w - 1 - x) = t.at(ci, y, x);
        return out;
    }
    if (op == AugmentOp::vflip) {
        Tensor out({c, l, w});
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t y = 0; y < l; ++y)
                for (std::size_t x = 0; x < w; ++x) out.at(ci, l - 1 - y, x) = t.at(ci, y, x);
        return out;
    }
    // rotate90: quarter turn, (y, x) -> (x, l - 1 - y); output is c x w x l.
    Tensor out({c, w, l});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < l; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(ci, x, l - 1 - y) = t.at(ci, y, x);
    return out;
}

}  // namespace

void augment(Tensor& stack, Tensor& label, AugmentOp op) {
    check_same_shape(stack, label, "augment");
    require(stack.rank() == 3, "augment: expected k x l x w stacks");
    stack = transform_stack(stack, op);
    label = transform_stack(label, op);
}

}  // namespace mdsnet
