#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mdsnet/metrics.hpp"

namespace mdsnet {

// One CSV row per case: id,dice,jaccard,precision,recall,rmse.
std::string report_to_csv(const MetricReport& report);

// Aggregate JSON mirroring the mean/stdv/min/max summary per metric.
std::string report_to_json(const MetricReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Generic CSV writer for curve/sweep data; every row must match the header's
// column count.
std::string rows_to_csv(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

}  // namespace mdsnet
