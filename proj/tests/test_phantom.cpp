#include "doctest.h"
#include "mdsnet/error.hpp"
#include "mdsnet/phantom.hpp"

using namespace mdsnet;

TEST_CASE("same seed gives bit-identical phantoms") {
    const auto [img1, lab1] = generate_phantom(7, 16, 24, 24, 0.5);
    const auto [img2, lab2] = generate_phantom(7, 16, 24, 24, 0.5);
    CHECK(img1.voxels == img2.voxels);
    CHECK(lab1.voxels == lab2.voxels);

    const auto [img3, lab3] = generate_phantom(8, 16, 24, 24, 0.5);
    CHECK(img3.voxels != img1.voxels);
}

TEST_CASE("zero shape variability gives identical cross-sections on every slice") {
    const auto [img, lab] = generate_phantom(3, 20, 32, 32, 0.0);
    const std::size_t plane = 32 * 32;
    for (std::size_t z = 1; z < 20; ++z) {
        for (std::size_t i = 0; i < plane; ++i) {
            REQUIRE(lab.voxels[z * plane + i] == lab.voxels[i]);
        }
    }
}

TEST_CASE("phantom image is normalized to [0,1] and label is binary") {
    const auto [img, lab] = generate_phantom(11, 16, 32, 40, 0.5);
    img.validate();
    lab.validate();
    double mn = 1.0, mx = 0.0;
    for (double v : img.voxels) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(mn == doctest::Approx(0.0));
    CHECK(mx == doctest::Approx(1.0));
}

TEST_CASE("foreground fraction stays within [0.5%, 10%] across 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto [img, lab] = generate_phantom(seed, 32, 64, 64);
        double fg = 0.0;
        for (double v : lab.voxels) fg += v;
        const double fraction = fg / static_cast<double>(lab.size());
        CHECK_MESSAGE(fraction >= 0.005, "seed ", seed, " fraction ", fraction);
        CHECK_MESSAGE(fraction <= 0.10, "seed ", seed, " fraction ", fraction);
    }
}

TEST_CASE("phantom dims below 16 are rejected") {
    CHECK_THROWS_AS(generate_phantom(0, 8, 32, 32, 0.5), Error);
}
