#include <limits>

#include "doctest.h"
#include "mdsnet/error.hpp"
#include "mdsnet/tensor.hpp"

using namespace mdsnet;

TEST_CASE("tensor shape and storage agree") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.extent(1) == 3);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

    t.at(1, 2, 3) = 5.0;
    CHECK(t[23] == 5.0);

    CHECK_THROWS_AS(Tensor({2, 0, 4}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("gradient buffer is lazily allocated and shaped like data") {
    Tensor t({3, 2});
    CHECK(!t.has_grad());
    t.ensure_grad();
    CHECK(t.has_grad());
    CHECK(t.grad().size() == t.size());
    t.grad()[0] = 7.0;
    t.zero_grad();
    CHECK(t.grad()[0] == 0.0);
}

TEST_CASE("finite check names the offending site") {
    Tensor t({2, 2});
    CHECK_NOTHROW(check_finite(t, "somewhere"));
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(check_finite(t, "conv1 output"),
                         doctest::Contains("conv1 output"), Error);
    t[1] = std::numeric_limits<double>::infinity();
    CHECK(!t.all_finite());
}

TEST_CASE("shape mismatch errors carry both shapes") {
    Tensor a({2, 3}), b({3, 2});
    CHECK_THROWS_WITH_AS(check_same_shape(a, b, "op"), doctest::Contains("[2x3]"), Error);
}
