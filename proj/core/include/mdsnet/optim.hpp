#pragma once

#include "mdsnet/layers.hpp"

namespace mdsnet {

// Momentum SGD, Polyak form: s_t = p * s_{t-1} - lr * g ; w += s_t.
// Throws naming the layer when a gradient is non-finite.
void sgd_momentum_step(const ModelParams& params, double lr, double momentum);

void zero_grads(const ModelParams& params);

}  // namespace mdsnet
