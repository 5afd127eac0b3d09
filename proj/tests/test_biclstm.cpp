#include <cmath>

#include "doctest.h"
#include "fd.hpp"
#include "mdsnet/biclstm.hpp"
#include "mdsnet/error.hpp"
#include "mdsnet/phantom.hpp"

using namespace mdsnet;

namespace {

Tensor random_slice(std::size_t h, std::size_t w, Rng& rng) {
    Tensor t({1, h, w});
    for (double& v : t.values()) v = rng.uniform();
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("a zero-weight cell halves the carried state") {
    Rng rng(1);
    CLSTMCell cell(4, 3, rng, "cell");
    for (double& w : cell.params().weights.values()) w = 0.0;
    for (double& b : cell.params().bias.values()) b = 0.0;

    const Tensor x = random_slice(6, 6, rng);
    Tensor h_prev({4, 6, 6}), c_prev({4, 6, 6});
    for (double& v : c_prev.values()) v = rng.uniform(-2.0, 2.0);

    const auto step = cell.forward(x, h_prev, c_prev);
    for (std::size_t j = 0; j < step.c.size(); ++j) {
        CHECK(step.c[j] == doctest::Approx(0.5 * c_prev[j]).epsilon(1e-12));
        CHECK(step.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * c_prev[j])).epsilon(1e-12));
        CHECK(step.i[j] == 0.5);
        CHECK(step.f[j] == 0.5);
        CHECK(step.o[j] == 0.5);
        CHECK(step.g[j] == 0.0);
    }
}

TEST_CASE("hidden states are bounded and gates stay in (0,1)") {
    Rng rng(2);
    CLSTMCell cell(4, 3, rng, "cell");
    Tensor h({4, 8, 8}), c({4, 8, 8});
    for (int t = 0; t < 5; ++t) {
        const Tensor x = random_slice(8, 8, rng);
        const auto step = cell.forward(x, h, c);
        for (std::size_t j = 0; j < step.h.size(); ++j) {
            CHECK(std::fabs(step.h[j]) < 1.0);
            CHECK(step.i[j] > 0.0);
            CHECK(step.i[j] < 1.0);
            CHECK(step.f[j] > 0.0);
            CHECK(step.f[j] < 1.0);
        }
        h = step.h;
        c = step.c;
    }
}

TEST_CASE("one cell step passes the finite-difference check") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 10);
        CLSTMCell cell(3, 3, rng, "cell");
        Tensor x = random_slice(5, 5, rng);
        Tensor h_prev({3, 5, 5}), c_prev({3, 5, 5});
        for (double& v : h_prev.values()) v = rng.uniform(-0.5, 0.5);
        for (double& v : c_prev.values()) v = rng.uniform(-0.5, 0.5);
        Tensor coeff({3, 5, 5});
        for (double& v : coeff.values()) v = rng.uniform(-1.0, 1.0);

        auto loss = [&]() { return dot(cell.forward(x, h_prev, c_prev).h, coeff); };

        cell.params().zero_grad();
        const auto step = cell.forward(x, h_prev, c_prev);
        const Tensor none;
        const auto grads = cell.backward(step, coeff, none);

        CHECK(fd::check(x.values(), grads.dx.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(h_prev.values(), grads.dh_prev.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(c_prev.values(), grads.dc_prev.values(), loss).max_rel_err < 1e-4);
        CHECK(fd::check(cell.params().weights.values(), cell.params().weights.grad(), loss)
                  .max_rel_err < 1e-4);
        CHECK(fd::check(cell.params().bias.values(), cell.params().bias.grad(), loss)
                  .max_rel_err < 1e-4);
    }
}

TEST_CASE("refine emits one probability slice and validates the window") {
    Rng rng(3);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);
    const Tensor a = random_slice(8, 8, rng), b = random_slice(8, 8, rng),
                 c = random_slice(8, 8, rng);
    const Tensor out = model.refine({&a, &b, &c});
    REQUIRE(out.shape() == Shape{1, 8, 8});
    for (double v : out.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    CHECK_THROWS_WITH_AS(model.refine(std::vector<Tensor>{a, b}), doctest::Contains("3 slices"),
                         Error);
}

TEST_CASE("swapping cells, projection halves, and window order is a symmetry") {
    Rng rng(4);
    const std::size_t ch = 4;
    BiCLSTM orig(BiCLSTMConfig{ch, 3}, rng);
    Rng rng2(5);
    BiCLSTM swapped(BiCLSTMConfig{ch, 3}, rng2);

    swapped.forward_cell().params().weights = orig.backward_cell().params().weights;
    swapped.forward_cell().params().bias = orig.backward_cell().params().bias;
    swapped.backward_cell().params().weights = orig.forward_cell().params().weights;
    swapped.backward_cell().params().bias = orig.forward_cell().params().bias;
    // Projection halves swap with the directions.
    swapped.projection().bias = orig.projection().bias;
    for (std::size_t c = 0; c < ch; ++c) {
        swapped.projection().weights.at(0, c, 0, 0) = orig.projection().weights.at(0, ch + c, 0, 0);
        swapped.projection().weights.at(0, ch + c, 0, 0) = orig.projection().weights.at(0, c, 0, 0);
    }

    Rng data(6);
    const Tensor a = random_slice(7, 9, data), b = random_slice(7, 9, data),
                 c = random_slice(7, 9, data);
    const Tensor out1 = orig.refine({&a, &b, &c});
    const Tensor out2 = swapped.refine({&c, &b, &a});
    for (std::size_t i = 0; i < out1.size(); ++i) {
        CHECK(out1[i] == doctest::Approx(out2[i]).epsilon(1e-12));
    }
}

TEST_CASE("identical slices give coinciding center hidden states for shared cells") {
    Rng rng(7);
    CLSTMCell cell(3, 3, rng, "cell");
    Rng data(8);
    const Tensor x = random_slice(6, 6, data);
    const Tensor none;

    // Forward direction consumes (prev=x, center=x); backward consumes
    // (next=x, center=x). With one shared cell both recurrences coincide.
    const auto f0 = cell.forward(x, none, none);
    const auto f1 = cell.forward(x, f0.h, f0.c);
    const auto b0 = cell.forward(x, none, none);
    const auto b1 = cell.forward(x, b0.h, b0.c);
    CHECK(f1.h.values() == b1.h.values());
    CHECK(f1.c.values() == b1.c.values());
}

TEST_CASE("window gradients match finite differences end to end") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 20);
        BiCLSTM model(BiCLSTMConfig{3, 3}, rng);
        Tensor a = random_slice(5, 5, rng), b = random_slice(5, 5, rng),
               c = random_slice(5, 5, rng);
        Tensor coeff({1, 5, 5});
        for (double& v : coeff.values()) v = rng.uniform(-1.0, 1.0);

        auto loss = [&]() { return dot(model.refine({&a, &b, &c}), coeff); };

        model.zero_grad();
        model.refine_with_grad({&a, &b, &c}, coeff);

        for (LayerParams* p : model.parameters()) {
            const auto wres = fd::check(p->weights.values(), p->weights.grad(), loss);
            CHECK_MESSAGE(wres.max_rel_err < 1e-3, p->name, " weights rel err ", wres.max_rel_err);
            const auto bres = fd::check(p->bias.values(), p->bias.grad(), loss);
            CHECK_MESSAGE(bres.max_rel_err < 1e-3, p->name, " bias rel err ", bres.max_rel_err);
        }
    }
}

TEST_CASE("refine is translation equivariant away from the borders") {
    Rng rng(30);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);
    Rng data(31);
    const std::size_t h = 16, w = 16, dy = 3, dx = 2;
    const Tensor a = random_slice(h, w, data), b = random_slice(h, w, data),
                 c = random_slice(h, w, data);

    auto shift = [&](const Tensor& t) {
        Tensor out({1, h, w});
        for (std::size_t y = 0; y + dy < h; ++y)
            for (std::size_t x = 0; x + dx < w; ++x) out.at(0, y + dy, x + dx) = t.at(0, y, x);
        return out;
    };
    const Tensor sa = shift(a), sb = shift(b), sc = shift(c);

    const Tensor out = model.refine({&a, &b, &c});
    const Tensor out_shifted = model.refine({&sa, &sb, &sc});

    // Interior pixels: at least the receptive field away from every border.
    const std::size_t margin = 6;
    for (std::size_t y = margin; y + margin + dy < h; ++y) {
        for (std::size_t x = margin; x + margin + dx < w; ++x) {
            CHECK(out.at(0, y, x) ==
                  doctest::Approx(out_shifted.at(0, y + dy, x + dx)).epsilon(1e-12));
        }
    }
}

TEST_CASE("refine_volume handles a single-slice volume by edge replication") {
    Rng rng(9);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);
    Volume prob(1, 8, 8, VolumeKind::probability);
    Rng data(10);
    for (double& v : prob.voxels) v = data.uniform();

    const Volume refined = model.refine_volume(prob);
    REQUIRE(refined.d == 1);
    refined.validate();

    const std::size_t plane = 64;
    Tensor s({1, 8, 8});
    std::copy(prob.voxels.begin(), prob.voxels.begin() + plane, s.data());
    const Tensor direct = model.refine({&s, &s, &s});
    for (std::size_t i = 0; i < plane; ++i) CHECK(refined.voxels[i] == direct[i]);
}

TEST_CASE("refine_volume preserves dims and range") {
    Rng rng(11);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);
    auto [img, lab] = generate_phantom(3, 16, 16, 16, 0.5);
    Volume prob(16, 16, 16, VolumeKind::probability);
    Rng data(12);
    for (double& v : prob.voxels) v = data.uniform();

    const Volume refined = model.refine_volume(prob);
    CHECK(refined.d == prob.d);
    CHECK(refined.l == prob.l);
    CHECK(refined.w == prob.w);
    refined.validate();
}

TEST_CASE("zero training epochs leave the parameters untouched") {
    Rng rng(13);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);
    const Tensor before = model.forward_cell().params().weights;

    Volume prob(16, 16, 16, VolumeKind::probability);
    Volume label(16, 16, 16, VolumeKind::label);
    Rng train_rng(14);
    const auto losses = model.train({{&prob, &label}}, 0, 1e-3, 0.99, train_rng);
    CHECK(losses.empty());
    CHECK(model.forward_cell().params().weights.values() == before.values());
}

TEST_CASE("training loss is non-increasing in 10-epoch moving average") {
    Rng rng(15);
    BiCLSTM model(BiCLSTMConfig{4, 3}, rng);

    auto [img, lab] = generate_phantom(21, 16, 16, 16, 0.4);
    // A plausibly imperfect probability volume: label blurred toward 0.5.
    Volume prob(16, 16, 16, VolumeKind::probability);
    Rng noise(16);
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double target = lab.voxels[i] * 0.7 + 0.15;
        prob.voxels[i] = std::clamp(target + noise.normal(0.0, 0.08), 0.0, 1.0);
    }

    Rng train_rng(17);
    const auto losses = model.train({{&prob, &lab}}, 40, 1e-3, 0.99, train_rng);
    REQUIRE(losses.size() == 40);

    auto window_mean = [&](std::size_t start) {
        double s = 0.0;
        for (std::size_t i = start; i < start + 10; ++i) s += losses[i];
        return s / 10.0;
    };
    for (std::size_t start = 0; start + 11 <= losses.size(); ++start) {
        CHECK(window_mean(start + 1) <= window_mean(start) + 1e-9);
    }
}
