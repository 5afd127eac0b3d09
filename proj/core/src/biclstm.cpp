#include "mdsnet/biclstm.hpp"

#include <cmath>

#include "mdsnet/error.hpp"
#include "mdsnet/optim.hpp"
#include "mdsnet/stack_loss.hpp"

namespace mdsnet {

namespace {

Tensor zeros_like_state(std::size_t channels, std::size_t h, std::size_t w) {
    return Tensor({channels, h, w});
}

}  // namespace

CLSTMCell::CLSTMCell(std::size_t hidden_channels, std::size_t kernel, Rng& rng, std::string name)
    : hidden_(hidden_channels), kernel_(kernel) {
    require(hidden_channels >= 1, name, ": hidden_channels must be >= 1");
    require(kernel % 2 == 1, name, ": gate kernel must be odd, got ", kernel);
    gates_.name = std::move(name);
    gates_.weights = Tensor::zeros({4 * hidden_, 1 + hidden_, kernel_, kernel_});
    gates_.bias = Tensor::zeros({4 * hidden_});
    kaiming_init(gates_.weights, (1 + hidden_) * kernel_ * kernel_, rng);
    gates_.init_momentum();
}

CLSTMCell::Step CLSTMCell::forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev) {
    require(x.rank() == 3 && x.extent(0) == 1, gates_.name,
            ": cell input must be 1 x H x W, got ", shape_to_string(x.shape()));
    const std::size_t H = x.extent(1), W = x.extent(2);
    const std::size_t plane = H * W;

    Step step;
    step.c_prev = c_prev.empty() ? zeros_like_state(hidden_, H, W) : c_prev;
    const Tensor h0 = h_prev.empty() ? zeros_like_state(hidden_, H, W) : h_prev;
    require(h0.shape() == Shape({hidden_, H, W}), gates_.name, ": hidden state shape mismatch");
    require(step.c_prev.shape() == Shape({hidden_, H, W}), gates_.name,
            ": cell state shape mismatch");

    step.concat_input = Tensor({1 + hidden_, H, W});
    std::copy(x.data(), x.data() + plane, step.concat_input.data());
    std::copy(h0.data(), h0.data() + h0.size(), step.concat_input.data() + plane);

    const Tensor pre = conv2d(step.concat_input, gates_, 1, kernel_ / 2);

    step.i = Tensor({hidden_, H, W});
    step.f = Tensor({hidden_, H, W});
    step.g = Tensor({hidden_, H, W});
    step.o = Tensor({hidden_, H, W});
    const double* pi = pre.data();
    const double* pf = pre.data() + hidden_ * plane;
    const double* pg = pre.data() + 2 * hidden_ * plane;
    const double* po = pre.data() + 3 * hidden_ * plane;
    for (std::size_t j = 0; j < hidden_ * plane; ++j) {
        step.i[j] = 1.0 / (1.0 + std::exp(-pi[j]));
        step.f[j] = 1.0 / (1.0 + std::exp(-pf[j]));
        step.g[j] = std::tanh(pg[j]);
        step.o[j] = 1.0 / (1.0 + std::exp(-po[j]));
    }

    step.c = Tensor({hidden_, H, W});
    step.tanh_c = Tensor({hidden_, H, W});
    step.h = Tensor({hidden_, H, W});
    for (std::size_t j = 0; j < hidden_ * plane; ++j) {
        step.c[j] = step.f[j] * step.c_prev[j] + step.i[j] * step.g[j];
        step.tanh_c[j] = std::tanh(step.c[j]);
        step.h[j] = step.o[j] * step.tanh_c[j];
    }
    check_finite(step.h, gates_.name + " hidden state");
    return step;
}

CLSTMCell::StepGrads CLSTMCell::backward(const Step& step, const Tensor& dh, const Tensor& dc) {
    const std::size_t H = step.h.extent(1), W = step.h.extent(2);
    const std::size_t n = hidden_ * H * W;
    require(dh.size() == n, gates_.name, ": dh size mismatch");

    Tensor dpre({4 * hidden_, H, W});
    double* dpi = dpre.data();
    double* dpf = dpre.data() + n;
    double* dpg = dpre.data() + 2 * n;
    double* dpo = dpre.data() + 3 * n;

    StepGrads grads;
    grads.dc_prev = Tensor({hidden_, H, W});
    for (std::size_t j = 0; j < n; ++j) {
        const double d_o = dh[j] * step.tanh_c[j];
        double d_c = dh[j] * step.o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
        if (!dc.empty()) d_c += dc[j];
        const double d_f = d_c * step.c_prev[j];
        const double d_i = d_c * step.g[j];
        const double d_g = d_c * step.i[j];
        grads.dc_prev[j] = d_c * step.f[j];
        dpi[j] = d_i * step.i[j] * (1.0 - step.i[j]);
        dpf[j] = d_f * step.f[j] * (1.0 - step.f[j]);
        dpg[j] = d_g * (1.0 - step.g[j] * step.g[j]);
        dpo[j] = d_o * step.o[j] * (1.0 - step.o[j]);
    }

    const Tensor dz = conv2d_backward(step.concat_input, gates_, dpre, 1, kernel_ / 2);
    const std::size_t plane = H * W;
    grads.dx = Tensor({1, H, W});
    grads.dh_prev = Tensor({hidden_, H, W});
    std::copy(dz.data(), dz.data() + plane, grads.dx.data());
    std::copy(dz.data() + plane, dz.data() + dz.size(), grads.dh_prev.data());
    return grads;
}

std::map<std::string, std::string> BiCLSTMConfig::to_map() const {
    return {{"hidden", std::to_string(hidden_channels)}, {"kernel", std::to_string(kernel)}};
}

BiCLSTMConfig BiCLSTMConfig::from_map(const std::map<std::string, std::string>& m) {
    BiCLSTMConfig c;
    auto get = [&](const char* key) {
        auto it = m.find(key);
        require(it != m.end(), "biclstm config missing key ", key);
        return static_cast<std::size_t>(std::stoull(it->second));
    };
    c.hidden_channels = get("hidden");
    c.kernel = get("kernel");
    return c;
}

BiCLSTM::BiCLSTM(const BiCLSTMConfig& config, Rng& rng)
    : config_(config),
      fwd_cell_(config.hidden_channels, config.kernel, rng, "cell.fwd"),
      bwd_cell_(config.hidden_channels, config.kernel, rng, "cell.bwd") {
    proj_.name = "proj";
    proj_.weights = Tensor::zeros({1, 2 * config.hidden_channels, 1, 1});
    proj_.bias = Tensor::zeros({1});
    kaiming_init(proj_.weights, 2 * config.hidden_channels, rng);
    proj_.init_momentum();
}

BiCLSTM::WindowTape BiCLSTM::forward_window(const std::array<const Tensor*, 3>& window) {
    for (const Tensor* slice : window) {
        require(slice != nullptr, "biclstm: window slice is null");
        require(slice->rank() == 3 && slice->extent(0) == 1,
                "biclstm: window slices must be 1 x H x W");
        require(slice->shape() == window[0]->shape(), "biclstm: window slice shapes differ");
    }
    const std::size_t H = window[0]->extent(1), W = window[0]->extent(2);
    const std::size_t ch = config_.hidden_channels;
    const Tensor none;

    WindowTape tape;
    tape.f0 = fwd_cell_.forward(*window[0], none, none);
    tape.f1 = fwd_cell_.forward(*window[1], tape.f0.h, tape.f0.c);
    tape.b0 = bwd_cell_.forward(*window[2], none, none);
    tape.b1 = bwd_cell_.forward(*window[1], tape.b0.h, tape.b0.c);

    tape.proj_input = Tensor({2 * ch, H, W});
    std::copy(tape.f1.h.data(), tape.f1.h.data() + tape.f1.h.size(), tape.proj_input.data());
    std::copy(tape.b1.h.data(), tape.b1.h.data() + tape.b1.h.size(),
              tape.proj_input.data() + tape.f1.h.size());

    Tensor pre = conv2d(tape.proj_input, proj_, 1, 0);
    tape.output = Tensor({1, H, W});
    for (std::size_t j = 0; j < pre.size(); ++j) {
        tape.output[j] = 1.0 / (1.0 + std::exp(-pre[j]));
    }
    return tape;
}

void BiCLSTM::backward_window(const WindowTape& tape, const Tensor& grad_output) {
    // Through the output sigmoid.
    Tensor dpre(tape.output.shape());
    for (std::size_t j = 0; j < dpre.size(); ++j) {
        const double y = tape.output[j];
        dpre[j] = grad_output[j] * y * (1.0 - y);
    }

    const Tensor dproj_in = conv2d_backward(tape.proj_input, proj_, dpre, 1, 0);

    const std::size_t half = tape.f1.h.size();
    Tensor dhf(tape.f1.h.shape()), dhb(tape.b1.h.shape());
    std::copy(dproj_in.data(), dproj_in.data() + half, dhf.data());
    std::copy(dproj_in.data() + half, dproj_in.data() + 2 * half, dhb.data());

    const Tensor none;
    const CLSTMCell::StepGrads gf1 = fwd_cell_.backward(tape.f1, dhf, none);
    fwd_cell_.backward(tape.f0, gf1.dh_prev, gf1.dc_prev);
    const CLSTMCell::StepGrads gb1 = bwd_cell_.backward(tape.b1, dhb, none);
    bwd_cell_.backward(tape.b0, gb1.dh_prev, gb1.dc_prev);
}

Tensor BiCLSTM::refine(const std::array<const Tensor*, 3>& window) {
    return forward_window(window).output;
}

Tensor BiCLSTM::refine(const std::vector<Tensor>& window) {
    require(window.size() == 3, "biclstm: refine window must hold 3 slices, got ", window.size());
    return refine({&window[0], &window[1], &window[2]});
}

Tensor BiCLSTM::refine_with_grad(const std::array<const Tensor*, 3>& window,
                                 const Tensor& grad_output) {
    const WindowTape tape = forward_window(window);
    check_same_shape(tape.output, grad_output, "biclstm refine_with_grad");
    backward_window(tape, grad_output);
    return tape.output;
}

Volume BiCLSTM::refine_volume(const Volume& prob_volume) {
    require(prob_volume.d >= 1, "biclstm: empty volume");
    Volume out(prob_volume.d, prob_volume.l, prob_volume.w, VolumeKind::probability);
    out.has_spacing = prob_volume.has_spacing;
    out.spacing = prob_volume.spacing;

    const std::size_t plane = prob_volume.l * prob_volume.w;
    auto slice_tensor = [&](std::size_t z) {
        Tensor t({1, prob_volume.l, prob_volume.w});
        std::copy(prob_volume.voxels.begin() + static_cast<std::ptrdiff_t>(z * plane),
                  prob_volume.voxels.begin() + static_cast<std::ptrdiff_t>((z + 1) * plane),
                  t.data());
        return t;
    };

    for (std::size_t t = 0; t < prob_volume.d; ++t) {
        const std::size_t prev = t == 0 ? 0 : t - 1;
        const std::size_t next = t + 1 < prob_volume.d ? t + 1 : t;
        const Tensor a = slice_tensor(prev), b = slice_tensor(t), c = slice_tensor(next);
        const Tensor refined = refine({&a, &b, &c});
        std::copy(refined.data(), refined.data() + plane,
                  out.voxels.begin() + static_cast<std::ptrdiff_t>(t * plane));
    }
    return out;
}

std::vector<double> BiCLSTM::train(
    const std::vector<std::pair<const Volume*, const Volume*>>& pairs, std::size_t epochs,
    double lr, double momentum, Rng& rng) {
    for (const auto& [prob, label] : pairs) {
        require(prob != nullptr && label != nullptr, "biclstm train: null volume");
        require(prob->d == label->d && prob->l == label->l && prob->w == label->w,
                "biclstm train: probability/label dims mismatch");
    }

    // Per-slice Dice loss; the plain stack Dice gradient with k = 1.
    const LossWeights slice_dice{1.0, 0.0, 1.0, 1e-8};

    std::vector<std::pair<std::size_t, std::size_t>> windows;  // (pair index, slice)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        for (std::size_t t = 0; t < pairs[p].first->d; ++t) windows.emplace_back(p, t);
    }

    std::vector<double> epoch_losses;
    const ModelParams params = parameters();
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(windows);
        double sum = 0.0;
        for (const auto& [p, t] : windows) {
            const Volume& prob = *pairs[p].first;
            const Volume& label = *pairs[p].second;
            const std::size_t plane = prob.l * prob.w;
            auto slice_of = [&](const Volume& v, std::size_t z) {
                Tensor s({1, v.l, v.w});
                std::copy(v.voxels.begin() + static_cast<std::ptrdiff_t>(z * plane),
                          v.voxels.begin() + static_cast<std::ptrdiff_t>((z + 1) * plane),
                          s.data());
                return s;
            };
            const std::size_t prev = t == 0 ? 0 : t - 1;
            const std::size_t next = t + 1 < prob.d ? t + 1 : t;
            const Tensor a = slice_of(prob, prev), b = slice_of(prob, t), c = slice_of(prob, next);
            const Tensor y = slice_of(label, t);

            const WindowTape tape = forward_window({&a, &b, &c});
            sum += soft_dice_loss(tape.output, y, slice_dice.eps_smooth);

            zero_grads(params);
            const Tensor grad = loss_gradient(tape.output, y, slice_dice);
            backward_window(tape, grad);
            sgd_momentum_step(params, lr, momentum);
        }
        epoch_losses.push_back(windows.empty() ? 0.0 : sum / static_cast<double>(windows.size()));
    }
    return epoch_losses;
}

ModelParams BiCLSTM::parameters() {
    return {&fwd_cell_.params(), &bwd_cell_.params(), &proj_};
}

void BiCLSTM::zero_grad() {
    for (LayerParams* p : parameters()) p->zero_grad();
}

std::vector<CheckpointEntry> BiCLSTM::checkpoint_entries() const {
    auto self = const_cast<BiCLSTM*>(this);
    std::vector<CheckpointEntry> entries;
    for (LayerParams* p : self->parameters()) {
        entries.push_back({p->name + ".weights", &p->weights, &p->weights_momentum});
        entries.push_back({p->name + ".bias", &p->bias, &p->bias_momentum});
    }
    return entries;
}

void BiCLSTM::save(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& extra) const {
    std::map<std::string, std::string> config = config_.to_map();
    for (const auto& [k, v] : extra) config[k] = v;
    save_checkpoint(path, kCheckpointKind, config, checkpoint_entries());
}

BiCLSTM BiCLSTM::load(const std::filesystem::path& path,
                      std::map<std::string, std::string>* extra) {
    const CheckpointInfo info = read_checkpoint_info(path);
    require(info.kind == kCheckpointKind, path.string(), ": checkpoint kind is ", info.kind,
            ", expected ", kCheckpointKind);
    const BiCLSTMConfig config = BiCLSTMConfig::from_map(info.config);
    Rng rng(0);
    BiCLSTM model(config, rng);
    std::vector<CheckpointSlot> slots;
    for (const CheckpointEntry& e : model.checkpoint_entries()) {
        slots.push_back({e.name, const_cast<Tensor*>(e.value), const_cast<Tensor*>(e.momentum)});
    }
    load_checkpoint(path, kCheckpointKind, slots);
    if (extra) *extra = info.config;
    return model;
}

}  // namespace mdsnet
