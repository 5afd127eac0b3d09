#include "mdsnet/cross_validation.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mdsnet/error.hpp"

namespace mdsnet {

std::vector<std::vector<std::size_t>> cv_partition(std::size_t cases, std::size_t folds,
                                                   std::uint64_t seed, std::size_t repetition) {
    require(folds >= 2, "cv: need at least 2 folds");
    require(cases >= folds, "cv: ", cases, " cases cannot fill ", folds, " folds");

    std::vector<std::size_t> order(cases);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(seed).fork(1000 + repetition);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> parts(folds);
    const std::size_t base = cases / folds;
    const std::size_t rem = cases % folds;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = base + (f < rem ? 1 : 0);
        parts[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return parts;
}

CVResult cross_validate(const Dataset& dataset, const CVPlan& plan, const TrainConfig& config) {
    require(plan.repetitions >= 1, "cv: repetitions must be >= 1");
    require(dataset.size() >= plan.folds, "cv: ", dataset.size(), " cases for ", plan.folds,
            " folds");

    CVResult result;
    for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
        const auto parts = cv_partition(dataset.size(), plan.folds, plan.seed, rep);
        std::vector<double> fold_dice, fold_rmse;
        for (std::size_t f = 0; f < plan.folds; ++f) {
            std::vector<std::size_t> train_idx;
            for (std::size_t g = 0; g < plan.folds; ++g) {
                if (g != f) train_idx.insert(train_idx.end(), parts[g].begin(), parts[g].end());
            }
            const Dataset train_set = dataset.subset(train_idx);
            const Dataset test_set = dataset.subset(parts[f]);

            TrainConfig fold_config = config;
            fold_config.seed = Rng(plan.seed).fork(100 * rep + f).next_u64();
            PipelineModels models = train_mdsnet(train_set, fold_config);
            MetricReport report = evaluate_pipeline(test_set, models, fold_config);

            fold_dice.push_back(report.dice.mean);
            if (report.rmse) fold_rmse.push_back(report.rmse->mean);
            result.folds.push_back({rep, f, std::move(report)});
        }
        result.repetition_mean_dice.push_back(
            std::accumulate(fold_dice.begin(), fold_dice.end(), 0.0) /
            static_cast<double>(fold_dice.size()));
        result.repetition_mean_rmse.push_back(
            fold_rmse.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : std::accumulate(fold_rmse.begin(), fold_rmse.end(), 0.0) /
                                    static_cast<double>(fold_rmse.size()));
    }
    return result;
}

TTestResult cv_group_ttest(const std::vector<double>& repetition_means, std::size_t group_a) {
    require(group_a >= 2 && repetition_means.size() >= group_a + 2,
            "cv t-test: need at least 2 repetitions per group");
    return two_sample_ttest(
        std::span(repetition_means.data(), group_a),
        std::span(repetition_means.data() + group_a, repetition_means.size() - group_a));
}

}  // namespace mdsnet
