#include <cmath>

#include "doctest.h"
#include "fd.hpp"
#include "mdsnet/error.hpp"
#include "mdsnet/optim.hpp"
#include "mdsnet/stack_loss.hpp"
#include "mdsnet/stack_unet.hpp"

using namespace mdsnet;

namespace {

Tensor random_stack(const UNetConfig& cfg, Rng& rng) {
    Tensor t({cfg.k, cfg.height, cfg.width});
    for (double& v : t.values()) v = rng.uniform();
    return t;
}

Tensor random_label(const UNetConfig& cfg, Rng& rng) {
    Tensor t({cfg.k, cfg.height, cfg.width});
    for (double& v : t.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    return t;
}

}  // namespace

TEST_CASE("forward maps a k-slice stack to k probability slices") {
    Rng rng(1);
    UNetConfig cfg{7, 8, 4, 64, 64};
    StackUNet model(cfg, rng);
    const Tensor out = model.forward(random_stack(cfg, rng), Mode::eval);
    REQUIRE(out.shape() == Shape{7, 64, 64});
    for (double v : out.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("config invariants are enforced") {
    CHECK_THROWS_AS(UNetConfig({7, 8, 4, 60, 64}).validate(), Error);  // 60 % 16 != 0
    CHECK_THROWS_AS(UNetConfig({7, 8, 0, 64, 64}).validate(), Error);
    Rng rng(2);
    UNetConfig cfg{3, 4, 2, 16, 16};
    StackUNet model(cfg, rng);
    CHECK_THROWS_AS(model.forward(Tensor({3, 16, 20}), Mode::eval), Error);
    CHECK_THROWS_AS(model.forward(Tensor({4, 16, 16}), Mode::eval), Error);
}

TEST_CASE("identical configs and seeds give bit-identical weights and outputs") {
    UNetConfig cfg{3, 4, 2, 16, 16};
    Rng r1(99), r2(99), rx(5);
    StackUNet a(cfg, r1), b(cfg, r2);
    CHECK(a.parameter_count() == b.parameter_count());

    const Tensor stack = random_stack(cfg, rx);
    const Tensor oa = a.forward(stack, Mode::eval);
    const Tensor ob = b.forward(stack, Mode::eval);
    CHECK(oa.values() == ob.values());

    // Two eval passes of the same model are bit-identical too.
    const Tensor oa2 = a.forward(stack, Mode::eval);
    CHECK(oa.values() == oa2.values());
}

TEST_CASE("parameter count is a pure function of the config") {
    UNetConfig cfg{3, 4, 2, 16, 16};
    Rng r1(1), r2(2);
    StackUNet a(cfg, r1), b(cfg, r2);
    CHECK(a.parameter_count() == b.parameter_count());

    // And grows when widening the base channels.
    UNetConfig wider = cfg;
    wider.base_channels = 8;
    Rng r3(1);
    StackUNet c(wider, r3);
    CHECK(c.parameter_count() > a.parameter_count());
}

TEST_CASE("decoder concat width is encoder width plus deconv width") {
    Rng rng(3);
    const std::size_t base = 4, depth = 3;
    UNetConfig cfg{5, base, depth, 32, 32};
    StackUNet model(cfg, rng);

    for (LayerParams* p : model.parameters()) {
        for (std::size_t j = 0; j < depth; ++j) {
            if (p->name == "dec" + std::to_string(j) + ".conv") {
                const std::size_t level_w = base << j;
                // concat = deconv output (level_w) + encoder skip (level_w)
                CHECK(p->weights.shape() == Shape{level_w, 2 * level_w, 3, 3});
            }
            if (p->name == "up" + std::to_string(j)) {
                CHECK(p->weights.shape() == Shape{base << (j + 1), base << j, 2, 2});
            }
        }
    }
}

TEST_CASE("backward requires a forward tape and mirrors parameter shapes") {
    Rng rng(4);
    UNetConfig cfg{3, 4, 2, 16, 16};
    StackUNet model(cfg, rng);
    CHECK_THROWS_WITH_AS(model.backward(Tensor({3, 16, 16})), doctest::Contains("forward tape"),
                         Error);

    model.forward(random_stack(cfg, rng), Mode::train);
    model.zero_grad();
    model.backward(Tensor({3, 16, 16}));  // zero gradient in
    for (LayerParams* p : model.parameters()) {
        REQUIRE(p->weights.has_grad());
        CHECK(p->weights.grad().size() == p->weights.size());
        for (double g : p->weights.grad()) CHECK(g == 0.0);
        for (double g : p->bias.grad()) CHECK(g == 0.0);
    }
}

TEST_CASE("sampled parameter gradients match finite differences of the energy") {
    Rng rng(5);
    UNetConfig cfg{3, 4, 2, 16, 16};
    StackUNet model(cfg, rng);
    const Tensor stack = random_stack(cfg, rng);
    const Tensor label = random_label(cfg, rng);
    const LossWeights weights;

    auto loss = [&]() {
        return stack_loss(model.forward(stack, Mode::train), label, weights).total;
    };

    model.zero_grad();
    const Tensor pred = model.forward(stack, Mode::train);
    const Tensor grad_out = loss_gradient(pred, label, weights);
    const Tensor grad_in = model.backward(grad_out);
    CHECK(grad_in.shape() == stack.shape());

    Rng pick(123);
    for (LayerParams* p : model.parameters()) {
        std::vector<std::size_t> indices;
        for (int i = 0; i < 4; ++i) indices.push_back(pick.uniform_index(p->weights.size()));
        const auto res = fd::check_sampled(p->weights.values(), p->weights.grad(), loss, indices);
        CHECK_MESSAGE(res.max_rel_err < 1e-3, p->name, " weights rel err ", res.max_rel_err);

        if (p->bias.size() > 0) {
            const auto bres = fd::check_sampled(p->bias.values(), p->bias.grad(), loss,
                                                {pick.uniform_index(p->bias.size())});
            CHECK_MESSAGE(bres.max_rel_err < 1e-3, p->name, " bias rel err ", bres.max_rel_err);
        }
    }

    // Input gradient against FD as well.
    Tensor stack_copy = stack;
    auto loss_input = [&]() {
        return stack_loss(model.forward(stack_copy, Mode::train), label, weights).total;
    };
    std::vector<std::size_t> in_idx;
    for (int i = 0; i < 12; ++i) in_idx.push_back(pick.uniform_index(stack_copy.size()));
    const auto in_res = fd::check_sampled(stack_copy.values(), grad_in.values(), loss_input, in_idx);
    CHECK_MESSAGE(in_res.max_rel_err < 1e-3, "input grad rel err ", in_res.max_rel_err);
}

TEST_CASE("a single stack can be overfit to near-zero energy in 200 steps") {
    Rng rng(6);
    UNetConfig cfg{3, 4, 2, 16, 16};
    StackUNet model(cfg, rng);
    Rng data_rng(7);
    const Tensor stack = random_stack(cfg, data_rng);

    // A blobby, learnable target: one rectangle per slice.
    Tensor label({3, 16, 16});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 4; y < 12; ++y)
            for (std::size_t x = 5; x < 11; ++x) label.at(c, y, x) = 1.0;

    const LossWeights weights;
    const ModelParams params = model.parameters();
    double last = 1.0;
    for (int step = 0; step < 200; ++step) {
        zero_grads(params);
        const Tensor pred = model.forward(stack, Mode::train);
        last = stack_loss(pred, label, weights).total;
        model.backward(loss_gradient(pred, label, weights));
        sgd_momentum_step(params, 1e-3, 0.99);
    }
    CHECK_MESSAGE(last < 0.05, "energy after 200 steps: ", last);
}
