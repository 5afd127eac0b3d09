#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdsnet/volume.hpp"

namespace mdsnet {

struct OverlapMetrics {
    double dice = 0.0, jaccard = 0.0, precision = 0.0, recall = 0.0;
};

// Set-overlap metrics over binary masks. Convention for empty masks: both
// empty scores 1 across the board, exactly one empty scores 0.
OverlapMetrics binary_overlap_metrics(const Volume& pred_mask, const Volume& label);

// In-plane boundary voxels of a binary mask: foreground voxels with at least
// one 4-neighbor (same slice) that is background; voxels on the image edge
// count their out-of-image neighbors as background. Points are (z, y, x).
std::vector<std::array<std::size_t, 3>> boundary_points(const Volume& mask);

// Root mean square of the in-plane Euclidean distance from each prediction
// boundary point to its nearest label boundary point. Distances use the
// in-plane spacing when the prediction carries spacing metadata (mm),
// voxel units otherwise. Throws when either boundary is empty.
double boundary_rmse(const Volume& pred_mask, const Volume& label);

// Relative Dice change against a benchmark setting.
double sensitivity_ratio(double dice_changed, double dice_benchmark);

// (threshold, fraction of cases with dice >= threshold) per input threshold.
std::vector<std::pair<double, double>> reliability_curve(const std::vector<double>& per_case_dice,
                                                         const std::vector<double>& thresholds);

struct CaseMetrics {
    std::string id;
    double dice = 0.0, jaccard = 0.0, precision = 0.0, recall = 0.0;
    std::optional<double> rmse;  // absent when either boundary is empty
};

struct Aggregate {
    double mean = 0.0, stdv = 0.0, min = 0.0, max = 0.0;
};

struct MetricReport {
    std::vector<CaseMetrics> cases;
    Aggregate dice, jaccard, precision, recall;
    std::optional<Aggregate> rmse;
};

Aggregate aggregate(std::span<const double> values);

CaseMetrics evaluate_case(const std::string& id, const Volume& pred_mask, const Volume& label);

MetricReport make_report(std::vector<CaseMetrics> cases);

// Metrics restricted to slices [begin, end) of both volumes.
MetricReport slice_range_metrics(const Volume& pred_mask, const Volume& label, std::size_t begin,
                                 std::size_t end);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

// Two-sided Student's t-test, pooled equal-variance form.
TTestResult two_sample_ttest(std::span<const double> group_a, std::span<const double> group_b);

}  // namespace mdsnet
