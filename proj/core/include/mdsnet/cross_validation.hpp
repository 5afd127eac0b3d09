#pragma once

#include "mdsnet/metrics.hpp"
#include "mdsnet/pipeline.hpp"

namespace mdsnet {

struct CVPlan {
    std::size_t folds = 4;
    std::size_t repetitions = 1;
    std::uint64_t seed = 0;
};

// Case indices per fold for one repetition: a seeded shuffle split into
// `folds` parts whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> cv_partition(std::size_t cases, std::size_t folds,
                                                   std::uint64_t seed, std::size_t repetition);

struct CVFoldResult {
    std::size_t repetition = 0;
    std::size_t fold = 0;
    MetricReport report;
};

struct CVResult {
    std::vector<CVFoldResult> folds;
    // One value per repetition: the mean over that repetition's fold means.
    std::vector<double> repetition_mean_dice;
    std::vector<double> repetition_mean_rmse;  // NaN entries when no case had an rmse
};

CVResult cross_validate(const Dataset& dataset, const CVPlan& plan, const TrainConfig& config);

// Student's t-test between the first group_a repetitions and the rest.
TTestResult cv_group_ttest(const std::vector<double>& repetition_means, std::size_t group_a);

}  // namespace mdsnet
