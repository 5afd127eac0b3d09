#include "mdsnet/dataset.hpp"

#include <algorithm>

#include "mdsnet/error.hpp"
#include "mdsnet/phantom.hpp"
#include "mdsnet/volume_io.hpp"

namespace mdsnet {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    for (std::size_t i : indices) {
        require(i < cases.size(), "dataset subset: index ", i, " out of range");
        out.cases.push_back(cases[i]);
    }
    return out;
}

Dataset generate_phantom_dataset(std::uint64_t seed, std::size_t count, std::size_t d,
                                 std::size_t l, std::size_t w, double variability) {
    Dataset ds;
    for (std::size_t i = 0; i < count; ++i) {
        auto [image, label] = generate_phantom(seed + i, d, l, w, variability);
        std::string id = "case_" + std::to_string(i);
        if (i < 10) id.insert(5, "00");
        else if (i < 100) id.insert(5, "0");
        ds.cases.push_back({std::move(id), std::move(image), std::move(label)});
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const DatasetCase& c : dataset.cases) {
        save_volume(dir / (c.id + "_image.hdr"), c.image);
        save_volume(dir / (c.id + "_label.hdr"), c.label);
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    require(std::filesystem::is_directory(dir), "dataset directory not found: ", dir.string());
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_image.hdr";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            ids.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(ids.begin(), ids.end());
    require(!ids.empty(), "no *_image.hdr volumes found in ", dir.string());

    Dataset ds;
    for (const std::string& id : ids) {
        DatasetCase c;
        c.id = id;
        c.image = load_volume(dir / (id + "_image.hdr"));
        c.label = load_volume(dir / (id + "_label.hdr"));
        require(c.image.d == c.label.d && c.image.l == c.label.l && c.image.w == c.label.w,
                "case ", id, ": image/label dims mismatch");
        ds.cases.push_back(std::move(c));
    }
    return ds;
}

}  // namespace mdsnet
