#include "mdsnet/optim.hpp"

#include <cmath>

#include "mdsnet/error.hpp"

namespace mdsnet {

namespace {

void update_buffer(Tensor& value, Tensor& momentum, double lr, double p,
                   const std::string& layer) {
    value.ensure_grad();
    const std::vector<double>& g = value.grad();
    std::vector<double>& s = momentum.values();
    std::vector<double>& w = value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(g[i])) fail("non-finite gradient in layer ", layer);
        s[i] = p * s[i] - lr * g[i];
        w[i] += s[i];
    }
}

}  // namespace

void sgd_momentum_step(const ModelParams& params, double lr, double momentum) {
    for (LayerParams* lp : params) {
        require(lp->weights_momentum.same_shape(lp->weights) &&
                    lp->bias_momentum.same_shape(lp->bias),
                "layer ", lp->name, ": momentum state shape mismatch");
        update_buffer(lp->weights, lp->weights_momentum, lr, momentum, lp->name);
        update_buffer(lp->bias, lp->bias_momentum, lr, momentum, lp->name);
    }
}

void zero_grads(const ModelParams& params) {
    for (LayerParams* lp : params) lp->zero_grad();
}

}  // namespace mdsnet
