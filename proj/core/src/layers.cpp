#include "mdsnet/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "mdsnet/error.hpp"

namespace mdsnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using CRowMap = Eigen::Map<const RowMat>;
using ColMap = Eigen::Map<Eigen::MatrixXd>;
using CColMap = Eigen::Map<const Eigen::MatrixXd>;

using Index = std::ptrdiff_t;

// Gathers kernel windows of `src` (C x H x W) into a (C*k*k) x (oh*ow)
// column-major matrix. Window p = (oy, ox) reads src at
// (oy*stride - pad + ky, ox*stride - pad + kx); out-of-bounds reads are zero.
void im2col(const double* src, std::size_t C, std::size_t H, std::size_t W, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            std::vector<double>& cols) {
    const std::size_t rows = C * k * k;
    cols.assign(rows * oh * ow, 0.0);
    const Index iH = static_cast<Index>(H), iW = static_cast<Index>(W);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            double* col = cols.data() + (oy * ow + ox) * rows;
            for (std::size_t c = 0; c < C; ++c) {
                const double* plane = src + c * H * W;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const Index iy = static_cast<Index>(oy * stride + ky) - static_cast<Index>(pad);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const Index ix = static_cast<Index>(ox * stride + kx) - static_cast<Index>(pad);
                        if (iy >= 0 && iy < iH && ix >= 0 && ix < iW) {
                            col[(c * k + ky) * k + kx] = plane[iy * iW + ix];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds the (C*k*k) x (oh*ow) matrix into
// dst (C x H x W) with the same window geometry.
void col2im_add(const std::vector<double>& cols, std::size_t C, std::size_t H, std::size_t W,
                std::size_t k, std::size_t stride, std::size_t pad, std::size_t oh,
                std::size_t ow, double* dst) {
    const std::size_t rows = C * k * k;
    const Index iH = static_cast<Index>(H), iW = static_cast<Index>(W);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* col = cols.data() + (oy * ow + ox) * rows;
            for (std::size_t c = 0; c < C; ++c) {
                double* plane = dst + c * H * W;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const Index iy = static_cast<Index>(oy * stride + ky) - static_cast<Index>(pad);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const Index ix = static_cast<Index>(ox * stride + kx) - static_cast<Index>(pad);
                        if (iy >= 0 && iy < iH && ix >= 0 && ix < iW) {
                            plane[iy * iW + ix] += col[(c * k + ky) * k + kx];
                        }
                    }
                }
            }
        }
    }
}

void check_input_rank3(const Tensor& input, std::size_t channels, const std::string& name) {
    require(input.rank() == 3, name, ": expected C x H x W input, got shape ",
            shape_to_string(input.shape()));
    require(input.extent(0) == channels, name, ": expected ", channels,
            " input channels, got ", input.extent(0));
}

}  // namespace

void kaiming_init(Tensor& weights, std::size_t fan_in, Rng& rng) {
    const double stdv = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : weights.values()) w = rng.normal(0.0, stdv);
}

Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride,
              std::size_t padding) {
    require(params.weights.rank() == 4, params.name, ": conv weights must be 4-d");
    const std::size_t out_ch = params.weights.extent(0);
    const std::size_t in_ch = params.weights.extent(1);
    const std::size_t k = params.weights.extent(2);
    check_input_rank3(input, in_ch, params.name);

    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t oh = Conv2d::out_extent(H, k, stride, padding);
    const std::size_t ow = Conv2d::out_extent(W, k, stride, padding);

    std::vector<double> cols;
    im2col(input.data(), in_ch, H, W, k, stride, padding, oh, ow, cols);

    const std::size_t ckk = in_ch * k * k;
    const std::size_t npos = oh * ow;
    Tensor out({out_ch, oh, ow});
    CRowMap w_map(params.weights.data(), static_cast<Index>(out_ch), static_cast<Index>(ckk));
    CColMap cols_map(cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    RowMap out_map(out.data(), static_cast<Index>(out_ch), static_cast<Index>(npos));
    out_map.noalias() = w_map * cols_map;
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        out_map.row(static_cast<Index>(oc)).array() += params.bias[oc];
    }
    check_finite(out, params.name + " output");
    return out;
}

Tensor conv2d_backward(const Tensor& input, LayerParams& params, const Tensor& grad_output,
                       std::size_t stride, std::size_t padding) {
    const std::size_t out_ch = params.weights.extent(0);
    const std::size_t in_ch = params.weights.extent(1);
    const std::size_t k = params.weights.extent(2);
    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t oh = grad_output.extent(1), ow = grad_output.extent(2);
    require(grad_output.extent(0) == out_ch, params.name, ": grad_output channel mismatch");

    std::vector<double> cols;
    im2col(input.data(), in_ch, H, W, k, stride, padding, oh, ow, cols);

    const std::size_t ckk = in_ch * k * k;
    const std::size_t npos = oh * ow;
    params.weights.ensure_grad();
    params.bias.ensure_grad();

    CRowMap g_map(grad_output.data(), static_cast<Index>(out_ch), static_cast<Index>(npos));
    CColMap cols_map(cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    CRowMap w_map(params.weights.data(), static_cast<Index>(out_ch), static_cast<Index>(ckk));

    RowMap gw_map(params.weights.grad().data(), static_cast<Index>(out_ch),
                  static_cast<Index>(ckk));
    gw_map.noalias() += g_map * cols_map.transpose();
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        params.bias.grad()[oc] += g_map.row(static_cast<Index>(oc)).sum();
    }

    std::vector<double> grad_cols(ckk * npos);
    ColMap gc_map(grad_cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    gc_map.noalias() = w_map.transpose() * g_map;

    Tensor grad_input(input.shape());
    col2im_add(grad_cols, in_ch, H, W, k, stride, padding, oh, ow, grad_input.data());
    return grad_input;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, Rng& rng, std::string name)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
    require(stride >= 1, name, ": stride must be >= 1");
    require(kernel >= 1, name, ": kernel must be >= 1");
    params_.name = std::move(name);
    params_.weights = Tensor::zeros({out_channels, in_channels, kernel, kernel});
    params_.bias = Tensor::zeros({out_channels});
    kaiming_init(params_.weights, in_channels * kernel * kernel, rng);
    params_.init_momentum();
}

std::size_t Conv2d::out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    require(in + 2 * padding >= kernel, "conv2d: kernel extent ", kernel,
            " exceeds padded input extent ", in + 2 * padding);
    return (in + 2 * padding - kernel) / stride + 1;
}

Tensor Conv2d::forward(const Tensor& input) {
    check_input_rank3(input, in_channels_, params_.name);
    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t oh = out_extent(H, kernel_, stride_, padding_);
    const std::size_t ow = out_extent(W, kernel_, stride_, padding_);

    im2col(input.data(), in_channels_, H, W, kernel_, stride_, padding_, oh, ow, cached_cols_);
    cached_in_shape_ = input.shape();
    cached_out_shape_ = {out_channels_, oh, ow};

    Tensor out(cached_out_shape_);
    const std::size_t ckk = in_channels_ * kernel_ * kernel_;
    const std::size_t npos = oh * ow;
    CRowMap w_map(params_.weights.data(), static_cast<Index>(out_channels_), static_cast<Index>(ckk));
    CColMap cols_map(cached_cols_.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    RowMap out_map(out.data(), static_cast<Index>(out_channels_), static_cast<Index>(npos));
    out_map.noalias() = w_map * cols_map;
    for (std::size_t oc = 0; oc < out_channels_; ++oc) {
        out_map.row(static_cast<Index>(oc)).array() += params_.bias[oc];
    }
    check_finite(out, params_.name + " output");
    has_tape_ = true;
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
    require(has_tape_, params_.name, ": backward called without a forward tape");
    require(grad_output.shape() == cached_out_shape_, params_.name,
            ": grad_output shape ", shape_to_string(grad_output.shape()),
            " does not match forward output ", shape_to_string(cached_out_shape_));

    const std::size_t ckk = in_channels_ * kernel_ * kernel_;
    const std::size_t npos = cached_out_shape_[1] * cached_out_shape_[2];
    params_.weights.ensure_grad();
    params_.bias.ensure_grad();

    CRowMap g_map(grad_output.data(), static_cast<Index>(out_channels_), static_cast<Index>(npos));
    CColMap cols_map(cached_cols_.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    CRowMap w_map(params_.weights.data(), static_cast<Index>(out_channels_), static_cast<Index>(ckk));

    RowMap gw_map(params_.weights.grad().data(), static_cast<Index>(out_channels_),
                  static_cast<Index>(ckk));
    gw_map.noalias() += g_map * cols_map.transpose();
    for (std::size_t oc = 0; oc < out_channels_; ++oc) {
        params_.bias.grad()[oc] += g_map.row(static_cast<Index>(oc)).sum();
    }

    std::vector<double> grad_cols(ckk * npos);
    ColMap gc_map(grad_cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    gc_map.noalias() = w_map.transpose() * g_map;

    Tensor grad_input(cached_in_shape_);
    col2im_add(grad_cols, in_channels_, cached_in_shape_[1], cached_in_shape_[2], kernel_,
               stride_, padding_, cached_out_shape_[1], cached_out_shape_[2], grad_input.data());
    return grad_input;
}

// ---------------------------------------------------------------------------
// Deconv2d

Deconv2d::Deconv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                   std::size_t stride, std::size_t padding, Rng& rng, std::string name)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
    require(stride >= 1, name, ": stride must be >= 1");
    params_.name = std::move(name);
    params_.weights = Tensor::zeros({in_channels, out_channels, kernel, kernel});
    params_.bias = Tensor::zeros({out_channels});
    kaiming_init(params_.weights, in_channels * kernel * kernel, rng);
    params_.init_momentum();
}

std::size_t Deconv2d::out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
    const std::size_t grown = (in - 1) * stride + kernel;
    require(grown > 2 * padding, "deconv2d: padding ", padding,
            " consumes the whole output extent ", grown);
    return grown - 2 * padding;
}

Tensor Deconv2d::forward(const Tensor& input) {
    check_input_rank3(input, in_channels_, params_.name);
    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t oh = out_extent(H, kernel_, stride_, padding_);
    const std::size_t ow = out_extent(W, kernel_, stride_, padding_);

    cached_input_ = input;
    cached_out_shape_ = {out_channels_, oh, ow};

    const std::size_t ckk = out_channels_ * kernel_ * kernel_;
    const std::size_t npos = H * W;
    CRowMap w_map(params_.weights.data(), static_cast<Index>(in_channels_), static_cast<Index>(ckk));
    CRowMap x_map(input.data(), static_cast<Index>(in_channels_), static_cast<Index>(npos));

    std::vector<double> cols(ckk * npos);
    ColMap cols_map(cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    cols_map.noalias() = w_map.transpose() * x_map;

    Tensor out(cached_out_shape_);
    col2im_add(cols, out_channels_, oh, ow, kernel_, stride_, padding_, H, W, out.data());
    for (std::size_t oc = 0; oc < out_channels_; ++oc) {
        double* plane = out.data() + oc * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) plane[i] += params_.bias[oc];
    }
    check_finite(out, params_.name + " output");
    has_tape_ = true;
    return out;
}

Tensor Deconv2d::backward(const Tensor& grad_output) {
    require(has_tape_, params_.name, ": backward called without a forward tape");
    require(grad_output.shape() == cached_out_shape_, params_.name,
            ": grad_output shape ", shape_to_string(grad_output.shape()),
            " does not match forward output ", shape_to_string(cached_out_shape_));

    const std::size_t H = cached_input_.extent(1), W = cached_input_.extent(2);
    const std::size_t ckk = out_channels_ * kernel_ * kernel_;
    const std::size_t npos = H * W;
    params_.weights.ensure_grad();
    params_.bias.ensure_grad();

    std::vector<double> g_cols;
    im2col(grad_output.data(), out_channels_, cached_out_shape_[1], cached_out_shape_[2],
           kernel_, stride_, padding_, H, W, g_cols);

    CColMap gc_map(g_cols.data(), static_cast<Index>(ckk), static_cast<Index>(npos));
    CRowMap w_map(params_.weights.data(), static_cast<Index>(in_channels_), static_cast<Index>(ckk));
    CRowMap x_map(cached_input_.data(), static_cast<Index>(in_channels_), static_cast<Index>(npos));

    Tensor grad_input(cached_input_.shape());
    RowMap gx_map(grad_input.data(), static_cast<Index>(in_channels_), static_cast<Index>(npos));
    gx_map.noalias() = w_map * gc_map;

    RowMap gw_map(params_.weights.grad().data(), static_cast<Index>(in_channels_),
                  static_cast<Index>(ckk));
    gw_map.noalias() += x_map * gc_map.transpose();

    const double* g = grad_output.data();
    const std::size_t plane = cached_out_shape_[1] * cached_out_shape_[2];
    for (std::size_t oc = 0; oc < out_channels_; ++oc) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += g[oc * plane + i];
        params_.bias.grad()[oc] += s;
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// MaxPool2x2

Tensor MaxPool2x2::forward(const Tensor& input) {
    require(input.rank() == 3, name_, ": expected C x H x W input");
    const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
    require(H % 2 == 0 && W % 2 == 0, name_, ": spatial extents must be even, got ", H, "x", W);

    const std::size_t oh = H / 2, ow = W / 2;
    Tensor out({C, oh, ow});
    argmax_.assign(C * oh * ow, 0);
    for (std::size_t c = 0; c < C; ++c) {
        const double* plane = input.data() + c * H * W;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (2 * oy) * W + 2 * ox;
                double best_v = plane[best];
                const std::size_t cand[3] = {(2 * oy) * W + 2 * ox + 1, (2 * oy + 1) * W + 2 * ox,
                                             (2 * oy + 1) * W + 2 * ox + 1};
                for (std::size_t idx : cand) {
                    if (plane[idx] > best_v) {
                        best_v = plane[idx];
                        best = idx;
                    }
                }
                out.at(c, oy, ox) = best_v;
                argmax_[(c * oh + oy) * ow + ox] = c * H * W + best;
            }
        }
    }
    cached_in_shape_ = input.shape();
    has_tape_ = true;
    return out;
}

Tensor MaxPool2x2::backward(const Tensor& grad_output) {
    require(has_tape_, name_, ": backward called without a forward tape");
    require(grad_output.size() == argmax_.size(), name_, ": grad_output size mismatch");
    Tensor grad_input(cached_in_shape_);
    for (std::size_t i = 0; i < argmax_.size(); ++i) {
        grad_input[argmax_[i]] += grad_output[i];
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::size_t channels, std::string name, double eps, double ema_decay)
    : channels_(channels), eps_(eps), ema_decay_(ema_decay) {
    params_.name = std::move(name);
    params_.weights = Tensor::full({channels}, 1.0);
    params_.bias = Tensor::zeros({channels});
    params_.init_momentum();
    running_mean_ = Tensor::zeros({channels});
    running_var_ = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& input, Mode mode) {
    check_input_rank3(input, channels_, params_.name);
    const std::size_t M = input.extent(1) * input.extent(2);
    Tensor out(input.shape());
    cached_xhat_.assign(input.size(), 0.0);
    cached_inv_std_.assign(channels_, 0.0);

    for (std::size_t c = 0; c < channels_; ++c) {
        const double* x = input.data() + c * M;
        double mean, var;
        if (mode == Mode::train) {
            double s = 0.0;
            for (std::size_t i = 0; i < M; ++i) s += x[i];
            mean = s / static_cast<double>(M);
            double v = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                const double d = x[i] - mean;
                v += d * d;
            }
            var = v / static_cast<double>(M);
            running_mean_[c] = ema_decay_ * running_mean_[c] + (1.0 - ema_decay_) * mean;
            running_var_[c] = ema_decay_ * running_var_[c] + (1.0 - ema_decay_) * var;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + eps_);
        cached_inv_std_[c] = inv_std;
        const double gamma = params_.weights[c], beta = params_.bias[c];
        double* xhat = cached_xhat_.data() + c * M;
        double* o = out.data() + c * M;
        for (std::size_t i = 0; i < M; ++i) {
            xhat[i] = (x[i] - mean) * inv_std;
            o[i] = gamma * xhat[i] + beta;
        }
    }
    check_finite(out, params_.name + " output");
    cached_shape_ = input.shape();
    cached_mode_ = mode;
    has_tape_ = true;
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_output) {
    require(has_tape_, params_.name, ": backward called without a forward tape");
    require(grad_output.shape() == cached_shape_, params_.name, ": grad_output shape mismatch");
    const std::size_t M = cached_shape_[1] * cached_shape_[2];
    params_.weights.ensure_grad();
    params_.bias.ensure_grad();

    Tensor grad_input(cached_shape_);
    for (std::size_t c = 0; c < channels_; ++c) {
        const double* g = grad_output.data() + c * M;
        const double* xhat = cached_xhat_.data() + c * M;
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xhat[i];
        }
        params_.bias.grad()[c] += sum_g;
        params_.weights.grad()[c] += sum_gx;

        const double gamma = params_.weights[c];
        const double inv_std = cached_inv_std_[c];
        double* gi = grad_input.data() + c * M;
        if (cached_mode_ == Mode::train) {
            const double inv_m = 1.0 / static_cast<double>(M);
            for (std::size_t i = 0; i < M; ++i) {
                gi[i] = gamma * inv_std * inv_m *
                        (static_cast<double>(M) * g[i] - sum_g - xhat[i] * sum_gx);
            }
        } else {
            for (std::size_t i = 0; i < M; ++i) gi[i] = gamma * inv_std * g[i];
        }
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Elementwise layers

Tensor ReLU::forward(const Tensor& input) {
    Tensor out(input.shape());
    mask_.assign(input.size(), 0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] > 0.0) {
            out[i] = input[i];
            mask_[i] = 1;
        }
    }
    return out;
}

Tensor ReLU::backward(const Tensor& grad_output) const {
    require(grad_output.size() == mask_.size(), "relu: backward called without a forward tape");
    Tensor grad_input(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        if (mask_[i]) grad_input[i] = grad_output[i];
    }
    return grad_input;
}

Tensor Sigmoid::forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = 1.0 / (1.0 + std::exp(-input[i]));
    }
    cached_output_ = out.values();
    return out;
}

Tensor Sigmoid::backward(const Tensor& grad_output) const {
    require(grad_output.size() == cached_output_.size(),
            "sigmoid: backward called without a forward tape");
    Tensor grad_input(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        const double y = cached_output_[i];
        grad_input[i] = grad_output[i] * y * (1.0 - y);
    }
    return grad_input;
}

Tensor Tanh::forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
    cached_output_ = out.values();
    return out;
}

Tensor Tanh::backward(const Tensor& grad_output) const {
    require(grad_output.size() == cached_output_.size(),
            "tanh: backward called without a forward tape");
    Tensor grad_input(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        const double y = cached_output_[i];
        grad_input[i] = grad_output[i] * (1.0 - y * y);
    }
    return grad_input;
}

Tensor ConcatChannels::forward(const Tensor& a, const Tensor& b) {
    require(a.rank() == 3 && b.rank() == 3, "concat: expected C x H x W inputs");
    require(a.extent(1) == b.extent(1) && a.extent(2) == b.extent(2),
            "concat: spatial extents differ, ", shape_to_string(a.shape()), " vs ",
            shape_to_string(b.shape()));
    shape_a_ = a.shape();
    shape_b_ = b.shape();
    Tensor out({a.extent(0) + b.extent(0), a.extent(1), a.extent(2)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

std::pair<Tensor, Tensor> ConcatChannels::backward(const Tensor& grad_output) const {
    require(!shape_a_.empty(), "concat: backward called without a forward tape");
    Tensor ga(shape_a_), gb(shape_b_);
    std::copy(grad_output.data(), grad_output.data() + ga.size(), ga.data());
    std::copy(grad_output.data() + ga.size(), grad_output.data() + ga.size() + gb.size(),
              gb.data());
    return {std::move(ga), std::move(gb)};
}

}  // namespace mdsnet
