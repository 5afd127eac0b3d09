#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mdsnet/tensor.hpp"

namespace mdsnet {

// Composite stack energy: a stack-level soft Dice term L_v plus an L2 norm
// over the per-slice soft Dice losses L_s, combined as
//   L_t = lambda_v * L_v + lambda_s * L_s
// and batch-averaged. The gradient is computed analytically and injected
// into the network backward pass.
struct LossWeights {
    double lambda_v = 0.5;
    double lambda_s = 0.5;
    double eps_smooth = 1.0;  // smoothing in the Dice ratio, guards empty masses
    double eps_norm = 1e-8;   // guards the L2-norm division when all slices are perfect

    void validate() const;
};

struct StackLossValue {
    double total = 0.0;
    double l_v = 0.0;
    double l_s = 0.0;
    std::vector<double> per_slice_losses;
};

// 1 - (2*sum(pred*label) + eps) / (sum(pred) + sum(label) + eps).
double soft_dice_loss(std::span<const double> pred, std::span<const double> label, double eps);
double soft_dice_loss(const Tensor& pred, const Tensor& label, double eps);

// L2 norm of the per-slice soft Dice losses of a k x l x w stack.
std::pair<double, std::vector<double>> slice_regularizer(const Tensor& pred_stack,
                                                         const Tensor& label_stack, double eps);

// Energy of a single stack (no batch averaging).
StackLossValue stack_loss(const Tensor& pred_stack, const Tensor& label_stack,
                          const LossWeights& weights);

// Batch-averaged energy over (pred, label) stack pairs.
StackLossValue total_loss(const std::vector<const Tensor*>& pred_stacks,
                          const std::vector<const Tensor*>& label_stacks,
                          const LossWeights& weights);

// Analytic d L_t / d pred for one stack. Slice p receives
//   lambda_v * d_stack + lambda_s * d_slice_p * loss_p / (||loss||_2 + eps_norm).
// Callers training with batches scale by 1/N themselves, matching the
// batch-averaged total_loss.
Tensor loss_gradient(const Tensor& pred_stack, const Tensor& label_stack,
                     const LossWeights& weights);

}  // namespace mdsnet
