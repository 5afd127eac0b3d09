#pragma once

#include <functional>
#include <optional>

#include "mdsnet/dataset.hpp"
#include "mdsnet/stack_loss.hpp"
#include "mdsnet/stack_unet.hpp"

namespace mdsnet {

struct TrainConfig {
    std::size_t k = 7;
    double lambda_v = 0.5;
    double lambda_s = 0.5;
    double lr = 1e-3;
    double momentum = 0.99;
    std::size_t batch = 1;
    std::size_t epochs = 40;
    std::size_t refiner_epochs = 150;
    double thr = 0.5;
    std::uint64_t seed = 0;
    std::size_t base_channels = 16;
    std::size_t depth = 4;
    std::size_t refiner_hidden = 8;
    std::vector<ViewAxis> views = {ViewAxis::axial, ViewAxis::coronal, ViewAxis::sagittal};
    bool use_refiner = true;
    bool augment = true;
    double eps_smooth = 1.0;
    double eps_norm = 1e-8;

    LossWeights loss_weights() const { return {lambda_v, lambda_s, eps_smooth, eps_norm}; }
    void validate() const;
};

// A dataset case transposed into one view's frame and cropped so the
// in-plane extents divide 2^depth. Training crops around the label bounding
// box center; inference crops around the volume center.
struct ViewCase {
    std::string id;
    Volume image;
    Volume label;  // empty voxels when prepared label-free
};

std::vector<ViewCase> prepare_view_cases(const Dataset& dataset, ViewAxis view,
                                         std::size_t depth, bool crop_on_label);

// Called after every epoch with (epoch index, mean epoch loss, model).
using EpochSink = std::function<void(std::size_t, double, StackUNet&)>;

// One view's Stack-U-Net trained per Algorithm 1: shuffled stack units,
// momentum SGD on the composite stack energy, optional flip/rotation
// augmentation. Deterministic in (seed, config, dataset).
StackUNet train_unet(const Dataset& dataset, const TrainConfig& config, ViewAxis view,
                     std::vector<double>* epoch_losses = nullptr,
                     const EpochSink& sink = nullptr);

// Stack-plan inference over one view-frame volume: extract, forward in eval
// mode, merge with overlap averaging. Crops to the model's input extents
// around the volume center when needed and pastes the result back.
Volume predict(StackUNet& model, const Volume& image_view);

}  // namespace mdsnet
