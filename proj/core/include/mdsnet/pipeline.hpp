#pragma once

#include <map>

#include "mdsnet/biclstm.hpp"
#include "mdsnet/fusion.hpp"
#include "mdsnet/metrics.hpp"
#include "mdsnet/trainer.hpp"

namespace mdsnet {

struct PipelineModels {
    std::map<ViewAxis, StackUNet> unets;
    std::optional<BiCLSTM> refiner;
};

struct PipelineOutput {
    Volume fused_prob;    // mean of the per-view probabilities, axial frame
    Volume refined_prob;  // after BiCLSTM; equals fused_prob without a refiner
    Volume mask;          // refined_prob >= thr
};

// Per-view prediction re-aligned to the axial frame.
Volume predict_axial(StackUNet& model, ViewAxis view, const Volume& image_axial);

// Full inference: per-view predict, inverse transpose, fuse (single-view
// skips fusion), BiCLSTM refinement, threshold.
PipelineOutput run_pipeline(const Volume& image_axial, PipelineModels& models,
                            const TrainConfig& config);

// Trains one Stack-U-Net per configured view, then the BiCLSTM refiner on
// the training set's fused probability volumes (when enabled).
PipelineModels train_mdsnet(const Dataset& train_set, const TrainConfig& config,
                            std::map<ViewAxis, std::vector<double>>* view_losses = nullptr,
                            std::vector<double>* refiner_losses = nullptr);

// Convenience: run the pipeline on every case and report against the labels.
MetricReport evaluate_pipeline(const Dataset& test_set, PipelineModels& models,
                               const TrainConfig& config);

}  // namespace mdsnet
