#include "mdsnet/pipeline.hpp"

#include "mdsnet/error.hpp"
#include "mdsnet/metrics.hpp"

namespace mdsnet {

Volume predict_axial(StackUNet& model, ViewAxis view, const Volume& image_axial) {
    const Volume view_vol = transpose_view(image_axial, view);
    const Volume prob_view = predict(model, view_vol);
    return inverse_transpose_view(prob_view, view);
}

PipelineOutput run_pipeline(const Volume& image_axial, PipelineModels& models,
                            const TrainConfig& config) {
    config.validate();
    std::vector<Volume> view_probs;
    for (ViewAxis view : config.views) {
        auto it = models.unets.find(view);
        require(it != models.unets.end(), "pipeline: no model for requested view ",
                to_string(view));
        view_probs.push_back(predict_axial(it->second, view, image_axial));
    }

    std::vector<const Volume*> ptrs;
    for (const Volume& v : view_probs) ptrs.push_back(&v);

    PipelineOutput out;
    out.fused_prob = fuse_mean(ptrs);
    out.refined_prob =
        (config.use_refiner && models.refiner) ? models.refiner->refine_volume(out.fused_prob)
                                               : out.fused_prob;
    out.mask = threshold_mask(out.refined_prob, config.thr);
    return out;
}

PipelineModels train_mdsnet(const Dataset& train_set, const TrainConfig& config,
                            std::map<ViewAxis, std::vector<double>>* view_losses,
                            std::vector<double>* refiner_losses) {
    config.validate();
    PipelineModels models;
    for (ViewAxis view : config.views) {
        std::vector<double> losses;
        StackUNet model = train_unet(train_set, config, view, &losses);
        if (view_losses) (*view_losses)[view] = std::move(losses);
        models.unets.emplace(view, std::move(model));
    }

    if (config.use_refiner && config.refiner_epochs > 0) {
        // The refiner trains on the fused predictions of the training set.
        std::vector<Volume> probs;
        probs.reserve(train_set.cases.size());
        for (const DatasetCase& c : train_set.cases) {
            std::vector<Volume> view_probs;
            for (ViewAxis view : config.views) {
                view_probs.push_back(predict_axial(models.unets.at(view), view, c.image));
            }
            std::vector<const Volume*> ptrs;
            for (const Volume& v : view_probs) ptrs.push_back(&v);
            probs.push_back(fuse_mean(ptrs));
        }
        std::vector<std::pair<const Volume*, const Volume*>> pairs;
        for (std::size_t i = 0; i < train_set.cases.size(); ++i) {
            pairs.emplace_back(&probs[i], &train_set.cases[i].label);
        }

        Rng rng = Rng(config.seed).fork(17);
        BiCLSTMConfig refiner_config{config.refiner_hidden, 3};
        models.refiner.emplace(refiner_config, rng);
        const std::vector<double> losses =
            models.refiner->train(pairs, config.refiner_epochs, config.lr, config.momentum, rng);
        if (refiner_losses) *refiner_losses = losses;
    }
    return models;
}

MetricReport evaluate_pipeline(const Dataset& test_set, PipelineModels& models,
                               const TrainConfig& config) {
    std::vector<CaseMetrics> cases;
    for (const DatasetCase& c : test_set.cases) {
        const PipelineOutput out = run_pipeline(c.image, models, config);
        cases.push_back(evaluate_case(c.id, out.mask, c.label));
    }
    return make_report(std::move(cases));
}

}  // namespace mdsnet
