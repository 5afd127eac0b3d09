#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mdsnet/rng.hpp"
#include "mdsnet/tensor.hpp"

namespace mdsnet {

enum class Mode { train, eval };

// One layer's trainable state: weights/bias plus the SGD momentum buffers.
struct LayerParams {
    std::string name;
    Tensor weights;
    Tensor bias;
    Tensor weights_momentum;
    Tensor bias_momentum;

    void init_momentum() {
        weights_momentum = Tensor::zeros(weights.shape());
        bias_momentum = Tensor::zeros(bias.shape());
    }
    void zero_grad() {
        weights.zero_grad();
        bias.zero_grad();
    }
};

using ModelParams = std::vector<LayerParams*>;

// 2D convolution over C_in x H x W inputs, square kernel.
// Weights are (C_out, C_in, k, k); output extent (H + 2p - k)/s + 1.
class Conv2d {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
           std::size_t stride, std::size_t padding, Rng& rng, std::string name);

    Tensor forward(const Tensor& input);
    // Accumulates weight/bias grads and returns the input gradient.
    Tensor backward(const Tensor& grad_output);

    LayerParams& params() { return params_; }
    const LayerParams& params() const { return params_; }
    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return out_channels_; }

    static std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                  std::size_t padding);

private:
    std::size_t in_channels_, out_channels_, kernel_, stride_, padding_;
    LayerParams params_;
    std::vector<double> cached_cols_;  // im2col of the padded input
    Shape cached_in_shape_;
    Shape cached_out_shape_;
    bool has_tape_ = false;
};

// Transposed convolution. Weights are (C_in, C_out, k, k); output extent
// (H - 1)*s - 2p + k. Exact adjoint of Conv2d with the same weight buffer.
class Deconv2d {
public:
    Deconv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
             std::size_t stride, std::size_t padding, Rng& rng, std::string name);

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    LayerParams& params() { return params_; }
    const LayerParams& params() const { return params_; }

    static std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                  std::size_t padding);

private:
    std::size_t in_channels_, out_channels_, kernel_, stride_, padding_;
    LayerParams params_;
    Tensor cached_input_;
    Shape cached_out_shape_;
    bool has_tape_ = false;
};

// 2x2 max pooling with stride 2. Ties break to the first element in
// row-major scan order; backward routes gradient to the recorded argmax.
class MaxPool2x2 {
public:
    explicit MaxPool2x2(std::string name) : name_(std::move(name)) {}

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    const std::vector<std::size_t>& argmax_indices() const { return argmax_; }

private:
    std::string name_;
    std::vector<std::size_t> argmax_;  // flat input index per output cell
    Shape cached_in_shape_;
    bool has_tape_ = false;
};

// Per-channel batch normalization over the spatial field of a single sample.
// Train mode uses batch statistics and updates the running EMA; eval mode
// normalizes with the running statistics.
class BatchNorm2d {
public:
    BatchNorm2d(std::size_t channels, std::string name, double eps = 1e-5,
                double ema_decay = 0.9);

    Tensor forward(const Tensor& input, Mode mode);
    Tensor backward(const Tensor& grad_output);

    LayerParams& params() { return params_; }
    const LayerParams& params() const { return params_; }
    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }
    double eps() const { return eps_; }

private:
    std::size_t channels_;
    double eps_, ema_decay_;
    LayerParams params_;  // weights = scale (gamma), bias = shift (beta)
    Tensor running_mean_, running_var_;
    std::vector<double> cached_xhat_;
    std::vector<double> cached_inv_std_;  // per channel
    Shape cached_shape_;
    Mode cached_mode_ = Mode::train;
    bool has_tape_ = false;
};

class ReLU {
public:
    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output) const;

private:
    std::vector<char> mask_;
};

class Sigmoid {
public:
    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output) const;

private:
    std::vector<double> cached_output_;
};

class Tanh {
public:
    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output) const;

private:
    std::vector<double> cached_output_;
};

// Stacks two feature maps along the channel axis; spatial extents must match.
class ConcatChannels {
public:
    Tensor forward(const Tensor& a, const Tensor& b);
    std::pair<Tensor, Tensor> backward(const Tensor& grad_output) const;

private:
    Shape shape_a_, shape_b_;
};

// Stateless convolution entry points over LayerParams, for callers that keep
// their own tapes (the ConvLSTM gate convolutions re-run im2col on backward).
Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride,
              std::size_t padding);
// Accumulates dW/db into the params' grad buffers; returns the input gradient.
Tensor conv2d_backward(const Tensor& input, LayerParams& params, const Tensor& grad_output,
                       std::size_t stride, std::size_t padding);

// Kaiming-style fan-in init: N(0, sqrt(2 / fan_in)), bias zero.
void kaiming_init(Tensor& weights, std::size_t fan_in, Rng& rng);

}  // namespace mdsnet
