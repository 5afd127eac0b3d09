#include "mdsnet/report.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mdsnet/error.hpp"

namespace mdsnet {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string report_to_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "case,dice,jaccard,precision,recall,rmse\n";
    for (const CaseMetrics& c : report.cases) {
        os << c.id << "," << format_double(c.dice) << "," << format_double(c.jaccard) << ","
           << format_double(c.precision) << "," << format_double(c.recall) << ",";
        if (c.rmse) os << format_double(*c.rmse);
        os << "\n";
    }
    return os.str();
}

namespace {

nlohmann::json aggregate_to_json(const Aggregate& a) {
    return {{"mean", a.mean}, {"stdv", a.stdv}, {"min", a.min}, {"max", a.max}};
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["cases"] = report.cases.size();
    j["dice"] = aggregate_to_json(report.dice);
    j["jaccard"] = aggregate_to_json(report.jaccard);
    j["precision"] = aggregate_to_json(report.precision);
    j["recall"] = aggregate_to_json(report.recall);
    if (report.rmse) j["rmse"] = aggregate_to_json(*report.rmse);
    return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path);
    require(f.good(), "cannot write ", path.string());
    f << content;
    f.close();
    require(f.good(), "failed writing ", path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open ", path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::string rows_to_csv(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) os << ",";
        os << header[i];
    }
    os << "\n";
    for (const auto& row : rows) {
        require(row.size() == header.size(), "csv row has ", row.size(), " columns, header has ",
                header.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ",";
            os << row[i];
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace mdsnet
