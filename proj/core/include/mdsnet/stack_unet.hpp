#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdsnet/checkpoint.hpp"
#include "mdsnet/layers.hpp"

namespace mdsnet {

struct UNetConfig {
    std::size_t k = 7;              // stack size = input/output channels
    std::size_t base_channels = 16; // width of the first encoder unit
    std::size_t depth = 4;          // number of down/up units
    std::size_t height = 64;        // in-plane extents (l, w)
    std::size_t width = 64;

    void validate() const;
    std::map<std::string, std::string> to_map() const;
    static UNetConfig from_map(const std::map<std::string, std::string>& m);
};

// Encoder-decoder segmentation net consuming a k-slice stack as k input
// channels and emitting k probability slices. Encoder units are
// Conv-ReLU-BN-Conv-ReLU-BN followed by 2x2 max pooling, with channel
// doubling per level; a pool-free unit of the same shape sits at the bottom.
// Decoder units are Deconv (k=2, s=2), concat with the mirrored encoder
// feature, then Conv-ReLU-BN. A final 1x1 conv maps to k channels, followed
// by a sigmoid.
class StackUNet {
public:
    StackUNet(const UNetConfig& config, Rng& rng);

    // stack must be k x height x width; output has the same shape, in (0,1).
    Tensor forward(const Tensor& stack, Mode mode = Mode::train);

    // grad_output is d loss / d output; accumulates parameter grads and
    // returns the gradient with respect to the input stack.
    Tensor backward(const Tensor& grad_output);

    ModelParams parameters();
    void zero_grad();
    std::size_t parameter_count() const;
    const UNetConfig& config() const { return config_; }

    void save(const std::filesystem::path& path,
              const std::map<std::string, std::string>& extra = {}) const;
    static StackUNet load(const std::filesystem::path& path,
                          std::map<std::string, std::string>* extra = nullptr);

    static constexpr const char* kCheckpointKind = "stack-unet";

private:
    struct Unit {
        Conv2d conv1;
        ReLU relu1;
        BatchNorm2d bn1;
        Conv2d conv2;
        ReLU relu2;
        BatchNorm2d bn2;

        Unit(std::size_t in, std::size_t out, Rng& rng, const std::string& prefix);
        Tensor forward(const Tensor& x, Mode mode);
        Tensor backward(const Tensor& g);
    };

    std::vector<CheckpointEntry> checkpoint_entries() const;
    std::vector<CheckpointSlot> checkpoint_slots();

    UNetConfig config_;
    std::vector<Unit> encoder_;  // depth entries plus the bottom unit
    std::vector<MaxPool2x2> pools_;
    std::vector<Deconv2d> ups_;       // indexed by decoder level j
    std::vector<ConcatChannels> concats_;
    std::vector<Conv2d> dec_convs_;
    std::vector<ReLU> dec_relus_;
    std::vector<BatchNorm2d> dec_bns_;
    std::optional<Conv2d> final_conv_;
    Sigmoid out_sigmoid_;
    bool has_tape_ = false;
};

}  // namespace mdsnet
