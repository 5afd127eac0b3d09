#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdsnet/checkpoint.hpp"
#include "mdsnet/layers.hpp"
#include "mdsnet/volume.hpp"

namespace mdsnet {

// One convolutional LSTM cell. The four gates are computed by a single
// convolution over the (input, hidden) channel stack:
//   i = sigmoid(.)  f = sigmoid(.)  g = tanh(.)  o = sigmoid(.)
//   c_t = f * c_prev + i * g ; h_t = o * tanh(c_t)
class CLSTMCell {
public:
    CLSTMCell(std::size_t hidden_channels, std::size_t kernel, Rng& rng, std::string name);

    struct Step {
        Tensor concat_input;     // (1 + Ch) x H x W
        Tensor i, f, g, o;       // gate activations
        Tensor c_prev, c, tanh_c;
        Tensor h;
    };
    struct StepGrads {
        Tensor dx;       // 1 x H x W
        Tensor dh_prev;  // Ch x H x W
        Tensor dc_prev;
    };

    // h_prev/c_prev may be empty tensors, meaning zero state.
    Step forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev);
    // dh/dc are the gradients flowing into h_t and c_t; accumulates the gate
    // convolution grads and returns the upstream gradients.
    StepGrads backward(const Step& step, const Tensor& dh, const Tensor& dc);

    LayerParams& params() { return gates_; }
    const LayerParams& params() const { return gates_; }
    std::size_t hidden_channels() const { return hidden_; }
    std::size_t kernel() const { return kernel_; }

private:
    std::size_t hidden_, kernel_;
    LayerParams gates_;  // weights (4*Ch, 1+Ch, k, k), bias (4*Ch)
};

struct BiCLSTMConfig {
    std::size_t hidden_channels = 8;
    std::size_t kernel = 3;

    std::map<std::string, std::string> to_map() const;
    static BiCLSTMConfig from_map(const std::map<std::string, std::string>& m);
};

// Bidirectional ConvLSTM refinement of a probability volume. Each slice t is
// refined from the window (t-1, t, t+1): a forward cell consumes (t-1, t)
// and a backward cell consumes (t+1, t); the center-step hidden states are
// combined by a 1x1 convolution and a sigmoid. (A third recurrence step per
// direction cannot reach the center combination, so it is not computed.)
// Boundary slices replicate the edge slice into the missing neighbor.
class BiCLSTM {
public:
    BiCLSTM(const BiCLSTMConfig& config, Rng& rng);

    // window = {prev, center, next}, each 1 x H x W; returns 1 x H x W in (0,1).
    Tensor refine(const std::array<const Tensor*, 3>& window);
    // Same, but validates the window length at runtime.
    Tensor refine(const std::vector<Tensor>& window);

    // Full forward/backward through one window for a caller-supplied output
    // gradient; accumulates parameter grads and returns the refined slice.
    Tensor refine_with_grad(const std::array<const Tensor*, 3>& window,
                            const Tensor& grad_output);

    Volume refine_volume(const Volume& prob_volume);

    // SGD-momentum training on per-slice soft Dice loss of refined outputs.
    // Returns the mean window loss per epoch.
    std::vector<double> train(const std::vector<std::pair<const Volume*, const Volume*>>& pairs,
                              std::size_t epochs, double lr, double momentum, Rng& rng);

    ModelParams parameters();
    void zero_grad();
    const BiCLSTMConfig& config() const { return config_; }
    CLSTMCell& forward_cell() { return fwd_cell_; }
    CLSTMCell& backward_cell() { return bwd_cell_; }
    LayerParams& projection() { return proj_; }

    void save(const std::filesystem::path& path,
              const std::map<std::string, std::string>& extra = {}) const;
    static BiCLSTM load(const std::filesystem::path& path,
                        std::map<std::string, std::string>* extra = nullptr);

    static constexpr const char* kCheckpointKind = "biclstm";

private:
    struct WindowTape {
        CLSTMCell::Step f0, f1;  // forward direction: (prev, center)
        CLSTMCell::Step b0, b1;  // backward direction: (next, center)
        Tensor proj_input;       // concat(h_fwd, h_bwd), 2Ch x H x W
        Tensor output;           // refined center slice, 1 x H x W
    };

    WindowTape forward_window(const std::array<const Tensor*, 3>& window);
    // Backpropagates d loss / d output through the window; accumulates grads.
    void backward_window(const WindowTape& tape, const Tensor& grad_output);

    std::vector<CheckpointEntry> checkpoint_entries() const;

    BiCLSTMConfig config_;
    CLSTMCell fwd_cell_, bwd_cell_;
    LayerParams proj_;  // 1x1 conv (1, 2*Ch, 1, 1) + bias (1)
};

}  // namespace mdsnet
