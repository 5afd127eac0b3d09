#pragma once

#include "mdsnet/pipeline.hpp"

namespace mdsnet {

enum class SweepAxis { stack_size, lambda_grid, lambda_float };

SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepRow {
    std::string label;
    double k = 0;
    double lambda_v = 0, lambda_s = 0;
    MetricReport report;
    // Dice variation ratio against the (0.5, 0.5) benchmark; lambda_float only.
    std::optional<double> sensitivity;
};

// One full train/evaluate per setting over a deterministic 3:1 train/test
// split of the dataset.
//   stack_size:   k in {3, 5, 7, 9}
//   lambda_grid:  (0.4, 0.6), (0.5, 0.5), (0.6, 0.4)
//   lambda_float: the benchmark plus both coefficients floated together by
//                 +/-10% and +/-20% in all four sign patterns (8 settings)
std::vector<SweepRow> sweep(const Dataset& dataset, const TrainConfig& base, SweepAxis axis);

}  // namespace mdsnet
