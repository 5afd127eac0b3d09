#include "mdsnet/stack_unet.hpp"

#include "mdsnet/error.hpp"

namespace mdsnet {

void UNetConfig::validate() const {
    require(k >= 1, "unet config: k must be >= 1");
    require(base_channels >= 1, "unet config: base_channels must be >= 1");
    require(depth >= 1, "unet config: depth must be >= 1");
    const std::size_t div = std::size_t{1} << depth;
    require(height % div == 0, "unet config: height ", height, " not divisible by 2^depth = ", div);
    require(width % div == 0, "unet config: width ", width, " not divisible by 2^depth = ", div);
    require(height / div >= 1 && width / div >= 1, "unet config: extents too small for depth");
}

std::map<std::string, std::string> UNetConfig::to_map() const {
    return {{"k", std::to_string(k)},
            {"base", std::to_string(base_channels)},
            {"depth", std::to_string(depth)},
            {"height", std::to_string(height)},
            {"width", std::to_string(width)}};
}

UNetConfig UNetConfig::from_map(const std::map<std::string, std::string>& m) {
    UNetConfig c;
    auto get = [&](const char* key) {
        auto it = m.find(key);
        require(it != m.end(), "unet config missing key ", key);
        return static_cast<std::size_t>(std::stoull(it->second));
    };
    c.k = get("k");
    c.base_channels = get("base");
    c.depth = get("depth");
    c.height = get("height");
    c.width = get("width");
    c.validate();
    return c;
}

StackUNet::Unit::Unit(std::size_t in, std::size_t out, Rng& rng, const std::string& prefix)
    : conv1(in, out, 3, 1, 1, rng, prefix + ".conv1"),
      bn1(out, prefix + ".bn1"),
      conv2(out, out, 3, 1, 1, rng, prefix + ".conv2"),
      bn2(out, prefix + ".bn2") {}

Tensor StackUNet::Unit::forward(const Tensor& x, Mode mode) {
    Tensor t = conv1.forward(x);
    t = relu1.forward(t);
    t = bn1.forward(t, mode);
    t = conv2.forward(t);
    t = relu2.forward(t);
    t = bn2.forward(t, mode);
    return t;
}

Tensor StackUNet::Unit::backward(const Tensor& g) {
    Tensor t = bn2.backward(g);
    t = relu2.backward(t);
    t = conv2.backward(t);
    t = bn1.backward(t);
    t = relu1.backward(t);
    t = conv1.backward(t);
    return t;
}

StackUNet::StackUNet(const UNetConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t base = config_.base_channels;

    std::size_t in = config_.k;
    for (std::size_t i = 0; i < config_.depth; ++i) {
        const std::size_t out = base << i;
        encoder_.emplace_back(in, out, rng, "enc" + std::to_string(i));
        pools_.emplace_back("pool" + std::to_string(i));
        in = out;
    }
    encoder_.emplace_back(in, base << config_.depth, rng, "bottom");

    ups_.reserve(config_.depth);
    for (std::size_t j = config_.depth; j-- > 0;) {
        const std::size_t wide = base << (j + 1);
        const std::size_t narrow = base << j;
        ups_.emplace_back(wide, narrow, 2, 2, 0, rng, "up" + std::to_string(j));
        dec_convs_.emplace_back(2 * narrow, narrow, 3, 1, 1, rng, "dec" + std::to_string(j) + ".conv");
        dec_bns_.emplace_back(narrow, "dec" + std::to_string(j) + ".bn");
    }
    concats_.resize(config_.depth);
    dec_relus_.resize(config_.depth);
    final_conv_.emplace(base, config_.k, 1, 1, 0, rng, "out.conv");
}

Tensor StackUNet::forward(const Tensor& stack, Mode mode) {
    require(stack.rank() == 3 && stack.extent(0) == config_.k &&
                stack.extent(1) == config_.height && stack.extent(2) == config_.width,
            "stack-unet: input shape ", shape_to_string(stack.shape()), " does not match config ",
            config_.k, "x", config_.height, "x", config_.width);

    std::vector<Tensor> skips(config_.depth);
    Tensor x = stack;
    for (std::size_t i = 0; i < config_.depth; ++i) {
        x = encoder_[i].forward(x, mode);
        skips[i] = x;
        x = pools_[i].forward(x);
    }
    x = encoder_[config_.depth].forward(x, mode);

    // ups_/dec_convs_/dec_bns_ hold decoder stages deepest-first.
    for (std::size_t s = 0; s < config_.depth; ++s) {
        const std::size_t level = config_.depth - 1 - s;
        x = ups_[s].forward(x);
        x = concats_[s].forward(x, skips[level]);
        x = dec_convs_[s].forward(x);
        x = dec_relus_[s].forward(x);
        x = dec_bns_[s].forward(x, mode);
    }
    x = final_conv_->forward(x);
    x = out_sigmoid_.forward(x);
    has_tape_ = true;
    return x;
}

Tensor StackUNet::backward(const Tensor& grad_output) {
    require(has_tape_, "stack-unet: backward called without a forward tape");

    Tensor g = out_sigmoid_.backward(grad_output);
    g = final_conv_->backward(g);

    std::vector<Tensor> skip_grads(config_.depth);
    for (std::size_t s = config_.depth; s-- > 0;) {
        const std::size_t level = config_.depth - 1 - s;
        g = dec_bns_[s].backward(g);
        g = dec_relus_[s].backward(g);
        g = dec_convs_[s].backward(g);
        auto [g_up, g_skip] = concats_[s].backward(g);
        skip_grads[level] = std::move(g_skip);
        g = ups_[s].backward(g_up);
    }

    g = encoder_[config_.depth].backward(g);
    for (std::size_t i = config_.depth; i-- > 0;) {
        g = pools_[i].backward(g);
        // The encoder unit output feeds both the pool and the skip branch.
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += skip_grads[i][j];
        g = encoder_[i].backward(g);
    }
    return g;
}

ModelParams StackUNet::parameters() {
    ModelParams params;
    for (Unit& u : encoder_) {
        params.push_back(&u.conv1.params());
        params.push_back(&u.bn1.params());
        params.push_back(&u.conv2.params());
        params.push_back(&u.bn2.params());
    }
    for (std::size_t s = 0; s < config_.depth; ++s) {
        params.push_back(&ups_[s].params());
        params.push_back(&dec_convs_[s].params());
        params.push_back(&dec_bns_[s].params());
    }
    params.push_back(&final_conv_->params());
    return params;
}

void StackUNet::zero_grad() {
    for (LayerParams* p : parameters()) p->zero_grad();
}

std::size_t StackUNet::parameter_count() const {
    std::size_t n = 0;
    auto self = const_cast<StackUNet*>(this);
    for (LayerParams* p : self->parameters()) n += p->weights.size() + p->bias.size();
    return n;
}

std::vector<CheckpointEntry> StackUNet::checkpoint_entries() const {
    auto self = const_cast<StackUNet*>(this);
    std::vector<CheckpointEntry> entries;
    for (LayerParams* p : self->parameters()) {
        entries.push_back({p->name + ".weights", &p->weights, &p->weights_momentum});
        entries.push_back({p->name + ".bias", &p->bias, &p->bias_momentum});
    }
    auto add_bn_stats = [&](BatchNorm2d& bn) {
        entries.push_back({bn.params().name + ".running_mean", &bn.running_mean(), nullptr});
        entries.push_back({bn.params().name + ".running_var", &bn.running_var(), nullptr});
    };
    for (Unit& u : self->encoder_) {
        add_bn_stats(u.bn1);
        add_bn_stats(u.bn2);
    }
    for (BatchNorm2d& bn : self->dec_bns_) add_bn_stats(bn);
    return entries;
}

std::vector<CheckpointSlot> StackUNet::checkpoint_slots() {
    std::vector<CheckpointSlot> slots;
    for (const CheckpointEntry& e : checkpoint_entries()) {
        slots.push_back({e.name, const_cast<Tensor*>(e.value), const_cast<Tensor*>(e.momentum)});
    }
    return slots;
}

void StackUNet::save(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& extra) const {
    std::map<std::string, std::string> config = config_.to_map();
    for (const auto& [k, v] : extra) config[k] = v;
    save_checkpoint(path, kCheckpointKind, config, checkpoint_entries());
}

StackUNet StackUNet::load(const std::filesystem::path& path,
                          std::map<std::string, std::string>* extra) {
    const CheckpointInfo info = read_checkpoint_info(path);
    require(info.kind == kCheckpointKind, path.string(), ": checkpoint kind is ", info.kind,
            ", expected ", kCheckpointKind);
    const UNetConfig config = UNetConfig::from_map(info.config);
    Rng rng(0);
    StackUNet model(config, rng);
    load_checkpoint(path, kCheckpointKind, model.checkpoint_slots());
    if (extra) *extra = info.config;
    return model;
}

}  // namespace mdsnet
