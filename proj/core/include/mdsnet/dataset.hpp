#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mdsnet/volume.hpp"

namespace mdsnet {

struct DatasetCase {
    std::string id;
    Volume image;
    Volume label;
};

struct Dataset {
    std::vector<DatasetCase> cases;

    std::size_t size() const { return cases.size(); }

    // Subset by case indices (reindexes nothing; ids are preserved).
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Seeded phantom dataset; case i uses seed + i.
Dataset generate_phantom_dataset(std::uint64_t seed, std::size_t count, std::size_t d,
                                 std::size_t l, std::size_t w, double variability = 0.5);

// Writes <id>_image.hdr/.raw and <id>_label.hdr/.raw per case.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Loads every *_image.hdr / *_label.hdr pair in the directory, sorted by id.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mdsnet
