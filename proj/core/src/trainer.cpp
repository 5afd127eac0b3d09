#include "mdsnet/trainer.hpp"

#include <cmath>

#include "mdsnet/error.hpp"
#include "mdsnet/optim.hpp"

namespace mdsnet {

void TrainConfig::validate() const {
    require(k >= 1, "train config: k must be >= 1");
    require(batch >= 1, "train config: batch must be >= 1");
    require(lr > 0.0, "train config: lr must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "train config: momentum must lie in [0, 1)");
    require(thr > 0.0 && thr < 1.0, "train config: thr must lie in (0, 1)");
    require(!views.empty(), "train config: at least one view required");
    loss_weights().validate();
}

namespace {

std::uint64_t view_tag(ViewAxis view) {
    switch (view) {
        case ViewAxis::axial: return 1;
        case ViewAxis::coronal: return 2;
        case ViewAxis::sagittal: return 3;
    }
    return 1;
}

std::size_t floor_multiple(std::size_t v, std::size_t div) { return (v / div) * div; }

}  // namespace

std::vector<ViewCase> prepare_view_cases(const Dataset& dataset, ViewAxis view,
                                         std::size_t depth, bool crop_on_label) {
    require(!dataset.cases.empty(), "prepare_view_cases: empty dataset");
    const std::size_t div = std::size_t{1} << depth;

    std::vector<ViewCase> out;
    for (const DatasetCase& c : dataset.cases) {
        ViewCase vc;
        vc.id = c.id;
        vc.image = transpose_view(c.image, view);
        const bool has_label = !c.label.voxels.empty();
        if (has_label) vc.label = transpose_view(c.label, view);

        const std::size_t tl = floor_multiple(vc.image.l, div);
        const std::size_t tw = floor_multiple(vc.image.w, div);
        require(tl >= div && tw >= div, "case ", c.id, " (", to_string(view),
                "): in-plane extents ", vc.image.l, "x", vc.image.w,
                " too small for depth ", depth);
        if (tl != vc.image.l || tw != vc.image.w) {
            const auto [cy, cx] = (crop_on_label && has_label)
                                      ? label_center(vc.label)
                                      : std::pair{vc.image.l / 2, vc.image.w / 2};
            vc.image = crop_to(vc.image, tl, tw, cy, cx);
            if (has_label) vc.label = crop_to(vc.label, tl, tw, cy, cx);
        }
        out.push_back(std::move(vc));
    }
    for (const ViewCase& vc : out) {
        require(vc.image.l == out[0].image.l && vc.image.w == out[0].image.w,
                "view cases have inconsistent in-plane extents (", vc.id, ")");
    }
    return out;
}

StackUNet train_unet(const Dataset& dataset, const TrainConfig& config, ViewAxis view,
                     std::vector<double>* epoch_losses, const EpochSink& sink) {
    config.validate();
    require(!dataset.cases.empty(), "train: empty dataset");

    const std::vector<ViewCase> cases = prepare_view_cases(dataset, view, config.depth, true);
    for (const ViewCase& vc : cases) {
        require(!vc.label.voxels.empty(), "train: case ", vc.id, " has no label");
        require(vc.image.d >= config.k, "train: case ", vc.id, " has depth ", vc.image.d,
                " < k = ", config.k);
    }

    UNetConfig net_config{config.k, config.base_channels, config.depth, cases[0].image.l,
                          cases[0].image.w};
    Rng rng = Rng(config.seed).fork(view_tag(view));
    StackUNet model(net_config, rng);
    const ModelParams params = model.parameters();
    const LossWeights weights = config.loss_weights();

    struct Sample {
        std::size_t case_idx, stack_idx;
    };
    std::vector<StackPlan> plans;
    std::vector<Sample> samples;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        plans.push_back(plan_stacks(cases[ci].image.d, config.k));
        for (std::size_t si = 0; si < plans.back().count(); ++si) samples.push_back({ci, si});
    }

    const bool square = cases[0].image.l == cases[0].image.w;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(samples);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < samples.size()) {
            const std::size_t batch_n = std::min(config.batch, samples.size() - done);
            zero_grads(params);
            for (std::size_t b = 0; b < batch_n; ++b) {
                const Sample& s = samples[done + b];
                Tensor stack = extract_stack(cases[s.case_idx].image, plans[s.case_idx], s.stack_idx);
                Tensor label = extract_stack(cases[s.case_idx].label, plans[s.case_idx], s.stack_idx);
                if (config.augment) {
                    // 0 keeps the stack as-is; quarter turns need square slices.
                    const std::uint64_t pick = rng.uniform_index(4);
                    if (pick == 1) augment(stack, label, AugmentOp::hflip);
                    else if (pick == 2) augment(stack, label, AugmentOp::vflip);
                    else if (pick == 3 && square) augment(stack, label, AugmentOp::rotate90);
                }
                const Tensor pred = model.forward(stack, Mode::train);
                const StackLossValue loss = stack_loss(pred, label, weights);
                epoch_loss += loss.total;

                Tensor grad = loss_gradient(pred, label, weights);
                if (batch_n > 1) {
                    const double inv = 1.0 / static_cast<double>(batch_n);
                    for (double& g : grad.values()) g *= inv;
                }
                model.backward(grad);
            }
            sgd_momentum_step(params, config.lr, config.momentum);
            done += batch_n;
        }
        epoch_loss /= static_cast<double>(samples.size());
        require(std::isfinite(epoch_loss), "training diverged: non-finite loss at epoch ", epoch);
        if (epoch_losses) epoch_losses->push_back(epoch_loss);
        if (sink) sink(epoch, epoch_loss, model);
    }
    return model;
}

Volume predict(StackUNet& model, const Volume& image_view) {
    const UNetConfig& cfg = model.config();
    require(image_view.d >= cfg.k, "predict: volume depth ", image_view.d, " < k = ", cfg.k);

    const bool needs_crop = image_view.l != cfg.height || image_view.w != cfg.width;
    Volume work = image_view;
    std::size_t y0 = 0, x0 = 0;
    if (needs_crop) {
        require(image_view.l >= cfg.height && image_view.w >= cfg.width,
                "predict: volume in-plane extents ", image_view.l, "x", image_view.w,
                " smaller than model input ", cfg.height, "x", cfg.width);
        // Label-free inference crops around the volume center.
        const std::size_t cy = image_view.l / 2, cx = image_view.w / 2;
        y0 = std::min(cy > cfg.height / 2 ? cy - cfg.height / 2 : 0, image_view.l - cfg.height);
        x0 = std::min(cx > cfg.width / 2 ? cx - cfg.width / 2 : 0, image_view.w - cfg.width);
        work = crop_to(image_view, cfg.height, cfg.width, cy, cx);
    }

    const StackPlan plan = plan_stacks(work.d, cfg.k);
    std::vector<Tensor> outputs;
    outputs.reserve(plan.count());
    for (std::size_t i = 0; i < plan.count(); ++i) {
        outputs.push_back(model.forward(extract_stack(work, plan, i), Mode::eval));
    }
    Volume prob = merge_stacks(outputs, plan, VolumeKind::probability);
    prob.has_spacing = work.has_spacing;
    prob.spacing = work.spacing;
    if (!needs_crop) return prob;

    Volume full(image_view.d, image_view.l, image_view.w, VolumeKind::probability);
    full.has_spacing = image_view.has_spacing;
    full.spacing = image_view.spacing;
    for (std::size_t z = 0; z < prob.d; ++z)
        for (std::size_t y = 0; y < prob.l; ++y)
            for (std::size_t x = 0; x < prob.w; ++x)
                full.at(z, y0 + y, x0 + x) = prob.at(z, y, x);
    return full;
}

}  // namespace mdsnet
