#include "mdsnet/stack_loss.hpp"

#include <cmath>

#include "mdsnet/error.hpp"

namespace mdsnet {

namespace {

void check_label_binary(std::span<const double> label) {
    for (double v : label) {
        require(v == 0.0 || v == 1.0, "soft_dice_loss: label contains non-binary value ", v);
    }
}

struct DiceSums {
    double intersection = 0.0;  // sum(pred * label)
    double mass = 0.0;          // sum(pred) + sum(label)
};

DiceSums dice_sums(std::span<const double> pred, std::span<const double> label) {
    DiceSums s;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s.intersection += pred[i] * label[i];
        s.mass += pred[i] + label[i];
    }
    return s;
}

double dice_from_sums(const DiceSums& s, double eps) {
    return 1.0 - (2.0 * s.intersection + eps) / (s.mass + eps);
}

// d/d pred_j of the smoothed soft Dice loss, given the block sums.
double dice_derivative(const DiceSums& s, double eps, double label_j) {
    const double denom = s.mass + eps;
    return -(2.0 * label_j * denom - (2.0 * s.intersection + eps)) / (denom * denom);
}

}  // namespace

void LossWeights::validate() const {
    require(lambda_v >= 0.0 && lambda_s >= 0.0, "loss weights must be non-negative");
    require(lambda_v + lambda_s > 0.0, "lambda_v + lambda_s must be positive");
    require(eps_smooth > 0.0, "eps_smooth must be positive");
    require(eps_norm > 0.0, "eps_norm must be positive");
}

double soft_dice_loss(std::span<const double> pred, std::span<const double> label, double eps) {
    require(pred.size() == label.size(), "soft_dice_loss: pred has ", pred.size(),
            " values, label has ", label.size());
    require(!pred.empty(), "soft_dice_loss: empty input");
    check_label_binary(label);
    return dice_from_sums(dice_sums(pred, label), eps);
}

double soft_dice_loss(const Tensor& pred, const Tensor& label, double eps) {
    check_same_shape(pred, label, "soft_dice_loss");
    return soft_dice_loss(std::span(pred.values()), std::span(label.values()), eps);
}

std::pair<double, std::vector<double>> slice_regularizer(const Tensor& pred_stack,
                                                         const Tensor& label_stack, double eps) {
    check_same_shape(pred_stack, label_stack, "slice_regularizer");
    require(pred_stack.rank() == 3, "slice_regularizer: expected k x l x w stacks, got ",
            shape_to_string(pred_stack.shape()));
    const std::size_t k = pred_stack.extent(0);
    const std::size_t slice = pred_stack.extent(1) * pred_stack.extent(2);

    std::vector<double> per_slice(k);
    double sq = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        per_slice[m] = soft_dice_loss(std::span(pred_stack.data() + m * slice, slice),
                                      std::span(label_stack.data() + m * slice, slice), eps);
        sq += per_slice[m] * per_slice[m];
    }
    return {std::sqrt(sq), std::move(per_slice)};
}

StackLossValue stack_loss(const Tensor& pred_stack, const Tensor& label_stack,
                          const LossWeights& weights) {
    weights.validate();
    StackLossValue v;
    v.l_v = soft_dice_loss(pred_stack, label_stack, weights.eps_smooth);
    auto [l_s, per_slice] = slice_regularizer(pred_stack, label_stack, weights.eps_smooth);
    v.l_s = l_s;
    v.per_slice_losses = std::move(per_slice);
    v.total = weights.lambda_v * v.l_v + weights.lambda_s * v.l_s;
    require(std::isfinite(v.total), "stack_loss: non-finite loss value");
    return v;
}

StackLossValue total_loss(const std::vector<const Tensor*>& pred_stacks,
                          const std::vector<const Tensor*>& label_stacks,
                          const LossWeights& weights) {
    require(!pred_stacks.empty(), "total_loss: empty batch");
    require(pred_stacks.size() == label_stacks.size(), "total_loss: batch size mismatch, ",
            pred_stacks.size(), " preds vs ", label_stacks.size(), " labels");

    StackLossValue acc;
    for (std::size_t i = 0; i < pred_stacks.size(); ++i) {
        const StackLossValue v = stack_loss(*pred_stacks[i], *label_stacks[i], weights);
        acc.total += v.total;
        acc.l_v += v.l_v;
        acc.l_s += v.l_s;
        acc.per_slice_losses.insert(acc.per_slice_losses.end(), v.per_slice_losses.begin(),
                                    v.per_slice_losses.end());
    }
    const double inv_n = 1.0 / static_cast<double>(pred_stacks.size());
    acc.total *= inv_n;
    acc.l_v *= inv_n;
    acc.l_s *= inv_n;
    return acc;
}

Tensor loss_gradient(const Tensor& pred_stack, const Tensor& label_stack,
                     const LossWeights& weights) {
    weights.validate();
    check_same_shape(pred_stack, label_stack, "loss_gradient");
    require(pred_stack.rank() == 3, "loss_gradient: expected k x l x w stacks");

    const std::size_t k = pred_stack.extent(0);
    const std::size_t slice = pred_stack.extent(1) * pred_stack.extent(2);
    const double eps = weights.eps_smooth;

    const DiceSums stack_sums =
        dice_sums(std::span(pred_stack.values()), std::span(label_stack.values()));

    std::vector<DiceSums> slice_sums(k);
    double norm_sq = 0.0;
    std::vector<double> slice_losses(k);
    for (std::size_t m = 0; m < k; ++m) {
        slice_sums[m] = dice_sums(std::span(pred_stack.data() + m * slice, slice),
                                  std::span(label_stack.data() + m * slice, slice));
        slice_losses[m] = dice_from_sums(slice_sums[m], eps);
        norm_sq += slice_losses[m] * slice_losses[m];
    }
    const double norm = std::sqrt(norm_sq);

    Tensor grad(pred_stack.shape());
    for (std::size_t m = 0; m < k; ++m) {
        const double slice_scale = weights.lambda_s * slice_losses[m] / (norm + weights.eps_norm);
        const double* lab = label_stack.data() + m * slice;
        double* g = grad.data() + m * slice;
        for (std::size_t j = 0; j < slice; ++j) {
            const double d_stack = dice_derivative(stack_sums, eps, lab[j]);
            const double d_slice = dice_derivative(slice_sums[m], eps, lab[j]);
            g[j] = weights.lambda_v * d_stack + slice_scale * d_slice;
        }
    }
    check_finite(grad, "loss_gradient output");
    return grad;
}

}  // namespace mdsnet
