#include "mdsnet/sweep.hpp"

#include <numeric>
#include <sstream>

#include "mdsnet/error.hpp"

namespace mdsnet {

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "k") return SweepAxis::stack_size;
    if (s == "lambda") return SweepAxis::lambda_grid;
    if (s == "lambda-float") return SweepAxis::lambda_float;
    fail("unknown sweep axis: ", s, " (expected k, lambda, or lambda-float)");
}

namespace {

struct Setting {
    std::string label;
    TrainConfig config;
    bool is_benchmark = false;
};

std::string lambda_label(double lv, double ls) {
    std::ostringstream os;
    os << "lv=" << lv << "_ls=" << ls;
    return os.str();
}

std::vector<Setting> settings_for(const TrainConfig& base, SweepAxis axis) {
    std::vector<Setting> settings;
    if (axis == SweepAxis::stack_size) {
        for (std::size_t k : {3, 5, 7, 9}) {
            TrainConfig c = base;
            c.k = k;
            settings.push_back({"k=" + std::to_string(k), c, false});
        }
        return settings;
    }
    if (axis == SweepAxis::lambda_grid) {
        const std::pair<double, double> grid[] = {{0.4, 0.6}, {0.5, 0.5}, {0.6, 0.4}};
        for (const auto& [lv, ls] : grid) {
            TrainConfig c = base;
            c.lambda_v = lv;
            c.lambda_s = ls;
            settings.push_back({lambda_label(lv, ls), c, false});
        }
        return settings;
    }
    // lambda_float: benchmark first, then both coefficients floated together.
    {
        TrainConfig c = base;
        c.lambda_v = 0.5;
        c.lambda_s = 0.5;
        settings.push_back({"benchmark", c, true});
    }
    for (double mag : {0.1, 0.2}) {
        const std::pair<double, double> signs[] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
        for (const auto& [sv, ss] : signs) {
            TrainConfig c = base;
            c.lambda_v = 0.5 * (1.0 + sv * mag);
            c.lambda_s = 0.5 * (1.0 + ss * mag);
            std::ostringstream label;
            label << "lv" << (sv > 0 ? "+" : "-") << mag * 100 << "%_ls" << (ss > 0 ? "+" : "-")
                  << mag * 100 << "%";
            settings.push_back({label.str(), c, false});
        }
    }
    return settings;
}

}  // namespace

std::vector<SweepRow> sweep(const Dataset& dataset, const TrainConfig& base, SweepAxis axis) {
    base.validate();
    require(dataset.size() >= 4, "sweep: need at least 4 cases, got ", dataset.size());

    // Deterministic 3:1 split.
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = Rng(base.seed).fork(2000);
    split_rng.shuffle(order);
    const std::size_t test_n = std::max<std::size_t>(1, dataset.size() / 4);
    const std::vector<std::size_t> test_idx(order.begin(),
                                            order.begin() + static_cast<std::ptrdiff_t>(test_n));
    const std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_n),
                                             order.end());
    const Dataset train_set = dataset.subset(train_idx);
    const Dataset test_set = dataset.subset(test_idx);

    std::vector<SweepRow> rows;
    double benchmark_dice = 0.0;
    bool have_benchmark = false;
    for (const Setting& s : settings_for(base, axis)) {
        PipelineModels models = train_mdsnet(train_set, s.config);
        MetricReport report = evaluate_pipeline(test_set, models, s.config);

        SweepRow row;
        row.label = s.label;
        row.k = static_cast<double>(s.config.k);
        row.lambda_v = s.config.lambda_v;
        row.lambda_s = s.config.lambda_s;
        row.report = std::move(report);
        if (s.is_benchmark) {
            benchmark_dice = row.report.dice.mean;
            have_benchmark = true;
        } else if (axis == SweepAxis::lambda_float) {
            require(have_benchmark, "sweep: benchmark setting must run first");
            row.sensitivity = sensitivity_ratio(row.report.dice.mean, benchmark_dice);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mdsnet
