#include <cmath>

#include "doctest.h"
#include "fd.hpp"
#include "mdsnet/error.hpp"
#include "mdsnet/layers.hpp"

using namespace mdsnet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d sums a ones kernel over a ones input") {
    Rng rng(1);
    Conv2d conv(1, 1, 3, 1, 0, rng, "conv");
    for (double& w : conv.params().weights.values()) w = 1.0;
    conv.params().bias[0] = 0.0;

    const Tensor out = conv.forward(Tensor::full({1, 3, 3}, 1.0));
    REQUIRE(out.shape() == Shape{1, 1, 1});
    CHECK(out[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d with an identity kernel and padding 1 reproduces the input") {
    Rng rng(2);
    Conv2d conv(1, 1, 3, 1, 1, rng, "conv");
    for (double& w : conv.params().weights.values()) w = 0.0;
    conv.params().weights.at(0, 0, 1, 1) = 1.0;
    conv.params().bias[0] = 0.0;

    const Tensor in = random_tensor({1, 5, 4}, rng);
    const Tensor out = conv.forward(in);
    REQUIRE(out.shape() == in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("conv2d rejects channel mismatches by name") {
    Rng rng(3);
    Conv2d conv(2, 1, 3, 1, 0, rng, "enc0.conv1");
    CHECK_THROWS_WITH_AS(conv.forward(Tensor({3, 5, 5})), doctest::Contains("enc0.conv1"), Error);
    CHECK_THROWS_AS(conv.forward(Tensor({2, 2, 2})), Error);  // kernel larger than input
}

TEST_CASE("conv2d gradients match central finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Conv2d conv(2, 3, 3, 1, 1, rng, "conv");
        Tensor input = random_tensor({2, 5, 5}, rng);
        const Tensor coeff = random_tensor({3, 5, 5}, rng);

        auto loss = [&]() { return dot(conv.forward(input), coeff); };

        conv.params().zero_grad();
        conv.forward(input);
        const Tensor grad_in = conv.backward(coeff);

        const auto in_check = fd::check(input.values(), grad_in.values(), loss);
        CHECK_MESSAGE(in_check.max_rel_err < 1e-4, "seed ", seed, " input grad rel err ",
                      in_check.max_rel_err);

        const auto w_check =
            fd::check(conv.params().weights.values(), conv.params().weights.grad(), loss);
        CHECK_MESSAGE(w_check.max_rel_err < 1e-4, "seed ", seed, " weight grad rel err ",
                      w_check.max_rel_err);

        const auto b_check = fd::check(conv.params().bias.values(), conv.params().bias.grad(), loss);
        CHECK_MESSAGE(b_check.max_rel_err < 1e-4, "seed ", seed, " bias grad rel err ",
                      b_check.max_rel_err);
    }
}

TEST_CASE("conv2d strided output extent follows the shape contract") {
    Rng rng(4);
    Conv2d conv(1, 2, 3, 2, 1, rng, "conv");
    const Tensor out = conv.forward(random_tensor({1, 7, 9}, rng));
    // (7 + 2 - 3)/2 + 1 = 4, (9 + 2 - 3)/2 + 1 = 5
    CHECK(out.shape() == Shape{2, 4, 5});
}

TEST_CASE("deconv2d doubles a 4x4 map with kernel 2 stride 2") {
    Rng rng(5);
    Deconv2d deconv(1, 1, 2, 2, 0, rng, "up");
    const Tensor out = deconv.forward(random_tensor({1, 4, 4}, rng));
    CHECK(out.shape() == Shape{1, 8, 8});
}

TEST_CASE("conv2d and deconv2d are adjoint through the same kernel") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const std::size_t cin = 2, cout = 3, k = 3, stride = 2, pad = 1;
        Conv2d conv(cin, cout, k, stride, pad, rng, "conv");
        Deconv2d deconv(cout, cin, k, stride, pad, rng, "deconv");
        deconv.params().weights = conv.params().weights;  // identical buffer
        for (double& b : conv.params().bias.values()) b = 0.0;
        for (double& b : deconv.params().bias.values()) b = 0.0;

        const Tensor x = random_tensor({cin, 7, 7}, rng);
        const Tensor cx = conv.forward(x);
        const Tensor y = random_tensor(cx.shape(), rng);
        const Tensor dy = deconv.forward(y);
        REQUIRE(dy.shape() == x.shape());

        const double lhs = dot(cx, y);
        const double rhs = dot(x, dy);
        CHECK(fd::rel_err(lhs, rhs, 1e-12) < 1e-8);
    }
}

TEST_CASE("deconv2d gradients match central finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        Deconv2d deconv(3, 2, 2, 2, 0, rng, "up");
        Tensor input = random_tensor({3, 4, 4}, rng);
        const Tensor coeff = random_tensor({2, 8, 8}, rng);

        auto loss = [&]() { return dot(deconv.forward(input), coeff); };

        deconv.params().zero_grad();
        deconv.forward(input);
        const Tensor grad_in = deconv.backward(coeff);

        CHECK(fd::check(input.values(), grad_in.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(deconv.params().weights.values(), deconv.params().weights.grad(), loss)
                  .max_rel_err < 1e-4);
        CHECK(fd::check(deconv.params().bias.values(), deconv.params().bias.grad(), loss)
                  .max_rel_err < 1e-4);
    }
}

TEST_CASE("maxpool picks the maximum of each 2x2 cell") {
    MaxPool2x2 pool("pool");
    Tensor in({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor out = pool.forward(in);
    REQUIRE(out.shape() == Shape{1, 1, 1});
    CHECK(out[0] == 4.0);
    CHECK(pool.argmax_indices()[0] == 3);
}

TEST_CASE("maxpool tie-breaks to the first row-major element") {
    MaxPool2x2 pool("pool");
    const Tensor out = pool.forward(Tensor::full({1, 4, 4}, 2.5));
    for (double v : out.values()) CHECK(v == 2.5);
    // All cells tie; gradient goes to the first element of each 2x2 block.
    Tensor g({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor back = pool.backward(g);
    CHECK(back.at(0, 0, 0) == 1.0);
    CHECK(back.at(0, 0, 2) == 2.0);
    CHECK(back.at(0, 2, 0) == 3.0);
    CHECK(back.at(0, 2, 2) == 4.0);
    CHECK(back.at(0, 1, 1) == 0.0);
}

TEST_CASE("maxpool rejects odd extents") {
    MaxPool2x2 pool("pool");
    CHECK_THROWS_AS(pool.forward(Tensor({1, 3, 4})), Error);
}

TEST_CASE("maxpool gradient matches finite differences on distinct values") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 40);
        MaxPool2x2 pool("pool");
        Tensor input = random_tensor({2, 6, 6}, rng);
        const Tensor coeff = random_tensor({2, 3, 3}, rng);
        auto loss = [&]() { return dot(pool.forward(input), coeff); };
        pool.forward(input);
        const Tensor grad_in = pool.backward(coeff);
        // Step small enough not to flip any argmax.
        CHECK(fd::check(input.values(), grad_in.values(), loss, 1e-7).max_rel_err < 1e-4);
    }
}

TEST_CASE("batchnorm train mode standardizes each channel") {
    Rng rng(6);
    BatchNorm2d bn(3, "bn");
    const Tensor in = random_tensor({3, 8, 8}, rng, 0.0, 10.0);
    const Tensor out = bn.forward(in, Mode::train);

    const std::size_t m = 64;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += out[c * m + i];
        mean /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            var += (out[c * m + i] - mean) * (out[c * m + i] - mean);
        }
        var /= static_cast<double>(m);
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(std::fabs(var - 1.0) < 1e-4);  // off by eps/(sigma^2 + eps)
    }
}

TEST_CASE("batchnorm is the identity when batch variance plus eps is one") {
    BatchNorm2d bn(1, "bn");
    // Values +/- a with a^2 = 1 - eps have mean 0 and variance 1 - eps,
    // so the normalizer sqrt(var + eps) is exactly 1.
    const double a = std::sqrt(1.0 - bn.eps());
    Tensor in({1, 2, 2}, {a, -a, a, -a});
    const Tensor out = bn.forward(in, Mode::train);
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i]).epsilon(1e-12));

    // And a unit-variance input is reproduced to within eps/2.
    Tensor unit({1, 2, 2}, {1.0, -1.0, 1.0, -1.0});
    const Tensor out2 = bn.forward(unit, Mode::train);
    for (std::size_t i = 0; i < unit.size(); ++i) CHECK(std::fabs(out2[i] - unit[i]) < 1e-5);
}

TEST_CASE("batchnorm eval mode uses running statistics") {
    Rng rng(7);
    BatchNorm2d bn(2, "bn");
    for (int i = 0; i < 10; ++i) bn.forward(random_tensor({2, 4, 4}, rng, 1.0, 3.0), Mode::train);

    const Tensor in = random_tensor({2, 4, 4}, rng, 1.0, 3.0);
    const Tensor a = bn.forward(in, Mode::eval);
    const Tensor b = bn.forward(in, Mode::eval);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // no state updates in eval
}

TEST_CASE("batchnorm gradients match central finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 60);
        BatchNorm2d bn(4, "bn");
        // Random scale/shift so the affine part is exercised too.
        for (double& g : bn.params().weights.values()) g = rng.uniform(0.5, 1.5);
        for (double& b : bn.params().bias.values()) b = rng.uniform(-0.5, 0.5);
        Tensor input = random_tensor({4, 4, 4}, rng);
        const Tensor coeff = random_tensor({4, 4, 4}, rng);

        auto loss = [&]() { return dot(bn.forward(input, Mode::train), coeff); };

        bn.params().zero_grad();
        bn.forward(input, Mode::train);
        const Tensor grad_in = bn.backward(coeff);

        CHECK(fd::check(input.values(), grad_in.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(bn.params().weights.values(), bn.params().weights.grad(), loss)
                  .max_rel_err < 1e-4);
        CHECK(fd::check(bn.params().bias.values(), bn.params().bias.grad(), loss).max_rel_err <
              1e-4);
    }
}

TEST_CASE("relu clamps negatives and is idempotent") {
    ReLU relu;
    Tensor in({1, 1, 2}, {-1.0, 2.0});
    const Tensor out = relu.forward(in);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 2.0);

    Rng rng(8);
    ReLU r2;
    Tensor x({2, 3, 3});
    for (double& v : x.values()) v = rng.uniform(-2.0, 2.0);
    const Tensor once = r2.forward(x);
    const Tensor twice = r2.forward(once);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == twice[i]);
}

TEST_CASE("sigmoid is 0.5 at zero and stays strictly inside (0,1)") {
    Sigmoid sig;
    Tensor in({1, 1, 3}, {0.0, -40.0, 40.0});
    const Tensor out = sig.forward(in);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] > 0.0);
    CHECK(out[2] < 1.0);
}

TEST_CASE("concat stacks channels and requires equal spatial extents") {
    ConcatChannels cat;
    const Tensor out = cat.forward(Tensor({3, 4, 5}), Tensor({5, 4, 5}));
    CHECK(out.shape() == Shape{8, 4, 5});

    ConcatChannels bad;
    CHECK_THROWS_AS(bad.forward(Tensor({3, 4, 5}), Tensor({5, 4, 4})), Error);

    // Backward splits the gradient exactly.
    Rng rng(9);
    Tensor g({8, 4, 5});
    for (double& v : g.values()) v = rng.uniform();
    const auto [ga, gb] = cat.backward(g);
    CHECK(ga.shape() == Shape{3, 4, 5});
    CHECK(gb.shape() == Shape{5, 4, 5});
    CHECK(ga[0] == g[0]);
    CHECK(gb[0] == g[3 * 20]);
}

TEST_CASE("stateless conv2d agrees with the layer and checks its own FD") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 80);
        Conv2d layer(2, 4, 3, 1, 1, rng, "conv");
        Tensor input = random_tensor({2, 6, 6}, rng);

        const Tensor a = layer.forward(input);
        const Tensor b = conv2d(input, layer.params(), 1, 1);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

        const Tensor coeff = random_tensor(a.shape(), rng);
        auto loss = [&]() { return dot(conv2d(input, layer.params(), 1, 1), coeff); };
        layer.params().zero_grad();
        const Tensor grad_in = conv2d_backward(input, layer.params(), coeff, 1, 1);
        CHECK(fd::check(input.values(), grad_in.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(layer.params().weights.values(), layer.params().weights.grad(), loss)
                  .max_rel_err < 1e-4);
    }
}
