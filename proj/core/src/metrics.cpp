#include "mdsnet/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "mdsnet/error.hpp"

namespace mdsnet {

namespace {

void check_binary(const Volume& v, const char* what) {
    for (double x : v.voxels) {
        require(x == 0.0 || x == 1.0, what, " mask contains non-binary value ", x);
    }
}

}  // namespace

OverlapMetrics binary_overlap_metrics(const Volume& pred_mask, const Volume& label) {
    require(pred_mask.d == label.d && pred_mask.l == label.l && pred_mask.w == label.w,
            "overlap metrics: dims mismatch");
    check_binary(pred_mask, "prediction");
    check_binary(label, "label");

    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred_mask.size(); ++i) {
        const bool p = pred_mask.voxels[i] != 0.0;
        const bool y = label.voxels[i] != 0.0;
        tp += p && y;
        fp += p && !y;
        fn += !p && y;
    }

    const std::size_t pred_n = tp + fp, label_n = tp + fn;
    if (pred_n == 0 && label_n == 0) return {1.0, 1.0, 1.0, 1.0};
    if (pred_n == 0 || label_n == 0) return {0.0, 0.0, 0.0, 0.0};

    OverlapMetrics m;
    m.dice = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    m.jaccard = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    m.precision = static_cast<double>(tp) / static_cast<double>(pred_n);
    m.recall = static_cast<double>(tp) / static_cast<double>(label_n);
    return m;
}

std::vector<std::array<std::size_t, 3>> boundary_points(const Volume& mask) {
    std::vector<std::array<std::size_t, 3>> points;
    for (std::size_t z = 0; z < mask.d; ++z) {
        for (std::size_t y = 0; y < mask.l; ++y) {
            for (std::size_t x = 0; x < mask.w; ++x) {
                if (mask.at(z, y, x) == 0.0) continue;
                const bool edge = y == 0 || y + 1 == mask.l || x == 0 || x + 1 == mask.w;
                if (edge || mask.at(z, y - 1, x) == 0.0 || mask.at(z, y + 1, x) == 0.0 ||
                    mask.at(z, y, x - 1) == 0.0 || mask.at(z, y, x + 1) == 0.0) {
                    points.push_back({z, y, x});
                }
            }
        }
    }
    return points;
}

double boundary_rmse(const Volume& pred_mask, const Volume& label) {
    require(pred_mask.d == label.d && pred_mask.l == label.l && pred_mask.w == label.w,
            "boundary rmse: dims mismatch");
    check_binary(pred_mask, "prediction");
    check_binary(label, "label");

    const auto pred_pts = boundary_points(pred_mask);
    const auto label_pts = boundary_points(label);
    require(!pred_pts.empty(), "boundary rmse: prediction boundary is empty");
    require(!label_pts.empty(), "boundary rmse: label boundary is empty");

    const double sy = pred_mask.has_spacing ? pred_mask.spacing[1] : 1.0;
    const double sx = pred_mask.has_spacing ? pred_mask.spacing[2] : 1.0;

    double sum_sq = 0.0;
    for (const auto& p : pred_pts) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : label_pts) {
            const double dy = (static_cast<double>(p[1]) - static_cast<double>(q[1])) * sy;
            const double dx = (static_cast<double>(p[2]) - static_cast<double>(q[2])) * sx;
            const double d2 = dy * dy + dx * dx;
            if (d2 < best) best = d2;
        }
        sum_sq += best;
    }
    return std::sqrt(sum_sq / static_cast<double>(pred_pts.size()));
}

double sensitivity_ratio(double dice_changed, double dice_benchmark) {
    require(dice_benchmark > 0.0, "sensitivity ratio: benchmark Dice must be positive, got ",
            dice_benchmark);
    return (dice_changed - dice_benchmark) / dice_benchmark;
}

std::vector<std::pair<double, double>> reliability_curve(const std::vector<double>& per_case_dice,
                                                         const std::vector<double>& thresholds) {
    require(!per_case_dice.empty(), "reliability curve: empty case list");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(thresholds.size());
    for (double thr : thresholds) {
        std::size_t n = 0;
        for (double d : per_case_dice) n += d >= thr;
        curve.emplace_back(thr, static_cast<double>(n) / static_cast<double>(per_case_dice.size()));
    }
    return curve;
}

Aggregate aggregate(std::span<const double> values) {
    require(!values.empty(), "aggregate: empty value list");
    Aggregate a;
    a.min = a.max = values[0];
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        a.min = std::min(a.min, v);
        a.max = std::max(a.max, v);
    }
    a.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - a.mean) * (v - a.mean);
        a.stdv = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return a;
}

CaseMetrics evaluate_case(const std::string& id, const Volume& pred_mask, const Volume& label) {
    CaseMetrics c;
    c.id = id;
    const OverlapMetrics m = binary_overlap_metrics(pred_mask, label);
    c.dice = m.dice;
    c.jaccard = m.jaccard;
    c.precision = m.precision;
    c.recall = m.recall;
    if (!boundary_points(pred_mask).empty() && !boundary_points(label).empty()) {
        c.rmse = boundary_rmse(pred_mask, label);
    }
    return c;
}

MetricReport make_report(std::vector<CaseMetrics> cases) {
    require(!cases.empty(), "metric report: no cases");
    MetricReport r;
    r.cases = std::move(cases);
    std::vector<double> dice, jaccard, precision, recall, rmse;
    for (const CaseMetrics& c : r.cases) {
        dice.push_back(c.dice);
        jaccard.push_back(c.jaccard);
        precision.push_back(c.precision);
        recall.push_back(c.recall);
        if (c.rmse) rmse.push_back(*c.rmse);
    }
    r.dice = aggregate(dice);
    r.jaccard = aggregate(jaccard);
    r.precision = aggregate(precision);
    r.recall = aggregate(recall);
    if (!rmse.empty()) r.rmse = aggregate(rmse);
    return r;
}

MetricReport slice_range_metrics(const Volume& pred_mask, const Volume& label, std::size_t begin,
                                 std::size_t end) {
    require(pred_mask.d == label.d, "slice range metrics: depth mismatch");
    require(begin < end && end <= pred_mask.d, "slice range [", begin, ", ", end,
            ") out of range for depth ", pred_mask.d);

    auto window = [&](const Volume& v) {
        Volume out(end - begin, v.l, v.w, v.kind);
        out.has_spacing = v.has_spacing;
        out.spacing = v.spacing;
        const std::size_t plane = v.l * v.w;
        std::copy(v.voxels.begin() + static_cast<std::ptrdiff_t>(begin * plane),
                  v.voxels.begin() + static_cast<std::ptrdiff_t>(end * plane), out.voxels.begin());
        return out;
    };
    const Volume p = window(pred_mask), y = window(label);
    return make_report({evaluate_case("slices_" + std::to_string(begin) + "_" +
                                          std::to_string(end),
                                      p, y)});
}

TTestResult two_sample_ttest(std::span<const double> group_a, std::span<const double> group_b) {
    require(group_a.size() >= 2 && group_b.size() >= 2,
            "t-test: each group needs at least 2 observations, got ", group_a.size(), " and ",
            group_b.size());
    const Aggregate a = aggregate(group_a), b = aggregate(group_b);
    const double n1 = static_cast<double>(group_a.size());
    const double n2 = static_cast<double>(group_b.size());
    const double pooled_var =
        ((n1 - 1.0) * a.stdv * a.stdv + (n2 - 1.0) * b.stdv * b.stdv) / (n1 + n2 - 2.0);
    require(pooled_var > 0.0, "t-test: degenerate (zero) pooled variance");

    TTestResult r;
    r.df = group_a.size() + group_b.size() - 2;
    r.t = (a.mean - b.mean) / std::sqrt(pooled_var * (1.0 / n1 + 1.0 / n2));
    const boost::math::students_t dist(static_cast<double>(r.df));
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    return r;
}

}  // namespace mdsnet
