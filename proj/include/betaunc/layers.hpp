#pragma once

// Differentiable 1-D layers with hand-written forward/backward passes.
//
// Every layer is templated on its storage scalar. The library trains in float;
// tests instantiate the same code with double as a high-precision shadow.
//
// Layers expose two forward entry points: forward() caches what backward()
// needs and may only be used by the single owner during training; infer() is
// const and touches no cache, so a trained model can serve concurrent callers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "betaunc/errors.hpp"
#include "betaunc/tensor.hpp"

namespace betaunc {

enum class Mode { Train, Infer };
enum class Padding { Same, None };

/// Trainable array with its gradient and Adam moment buffers.
template <class T>
struct Param {
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> adam_m;
    std::vector<T> adam_v;

    Param() = default;
    explicit Param(std::vector<std::size_t> shp, T fill = T{0}) : shape(std::move(shp)) {
        const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
        value.assign(n, fill);
        grad.assign(n, T{0});
        adam_m.assign(n, T{0});
        adam_v.assign(n, T{0});
    }

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

struct AdamState {
    std::uint64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Glorot-uniform samples on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
template <class T, class Rng>
std::vector<T> xavier_init(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in == 0 || fan_out == 0) {
        throw DomainError("xavier_init requires positive fan_in and fan_out");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> out(count);
    for (auto& v : out) v = static_cast<T>(dist(rng));
    return out;
}

/// One Adam update with bias correction over every parameter, then zero the grads.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState& state) {
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double corr1 = 1.0 - std::pow(state.beta1, t);
    const double corr2 = 1.0 - std::pow(state.beta2, t);
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    for (Param<T>* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            const double m = b1 * p->adam_m[i] + (1.0 - b1) * g;
            const double v = b2 * p->adam_v[i] + (1.0 - b2) * g * g;
            p->adam_m[i] = static_cast<T>(m);
            p->adam_v[i] = static_cast<T>(v);
            const double update = state.learning_rate * (m / corr1) / (std::sqrt(v / corr2) + state.epsilon);
            if (update != 0.0) {
                p->value[i] = static_cast<T>(p->value[i] - update);
            }
        }
        p->zero_grad();
    }
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvGeometry {
    std::size_t out_length;
    std::size_t pad_left;
};

/// Output length and left padding. "Same" keeps ceil(L / stride) outputs and
/// puts the odd padding element on the right.
inline ConvGeometry conv_geometry(std::size_t length, std::size_t kernel, std::size_t stride, Padding pad) {
    if (stride == 0 || kernel == 0) throw ContractViolation("conv1d: kernel and stride must be positive");
    if (pad == Padding::None) {
        if (length < kernel) throw ContractViolation("conv1d: input shorter than kernel");
        return {(length - kernel) / stride + 1, 0};
    }
    const std::size_t out = (length + stride - 1) / stride;
    const std::ptrdiff_t needed = static_cast<std::ptrdiff_t>((out - 1) * stride + kernel) - static_cast<std::ptrdiff_t>(length);
    const std::size_t total = needed > 0 ? static_cast<std::size_t>(needed) : 0;
    return {out, total / 2};
}

/// Cross-correlation with zero padding. kernel is [out_ch, in_ch, k], bias [out_ch].
template <class T>
Tensor3<T> conv1d_forward(const Tensor3<T>& x, const Param<T>& kernel, const Param<T>& bias, std::size_t stride,
                          Padding pad) {
    if (kernel.shape.size() != 3 || kernel.shape[1] != x.channels || bias.size() != kernel.shape[0]) {
        throw ContractViolation("conv1d_forward: kernel/bias shape does not match input channels");
    }
    const std::size_t oc_n = kernel.shape[0];
    const std::size_t ic_n = kernel.shape[1];
    const std::size_t k = kernel.shape[2];
    const auto geo = conv_geometry(x.length, k, stride, pad);
    const auto L = static_cast<std::ptrdiff_t>(x.length);
    Tensor3<T> y(x.batch, oc_n, geo.out_length);
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (std::size_t oc = 0; oc < oc_n; ++oc) {
            auto out = y.row(b, oc);
            std::fill(out.begin(), out.end(), bias.value[oc]);
            for (std::size_t ic = 0; ic < ic_n; ++ic) {
                const auto in = x.row(b, ic);
                const T* w = kernel.value.data() + (oc * ic_n + ic) * k;
                for (std::size_t o = 0; o < geo.out_length; ++o) {
                    const std::ptrdiff_t start =
                        static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(geo.pad_left);
                    T acc{0};
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(kk);
                        if (idx >= 0 && idx < L) acc += w[kk] * in[static_cast<std::size_t>(idx)];
                    }
                    out[o] += acc;
                }
            }
        }
    }
    return y;
}

template <class T>
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, Padding pad = Padding::Same)
        : kernel_({out_ch, in_ch, kernel}), bias_({out_ch}), stride_(stride), pad_(pad) {}

    template <class Rng>
    void init(Rng& rng) {
        const std::size_t k = kernel_.shape[2];
        kernel_.value = xavier_init<T>(kernel_.size(), kernel_.shape[1] * k, kernel_.shape[0] * k, rng);
        std::fill(bias_.value.begin(), bias_.value.end(), T{0});
    }

    Tensor3<T> infer(const Tensor3<T>& x) const { return conv1d_forward(x, kernel_, bias_, stride_, pad_); }

    Tensor3<T> forward(const Tensor3<T>& x) {
        cache_ = x;
        has_cache_ = true;
        return infer(x);
    }

    /// Returns dL/dx and accumulates kernel and bias gradients.
    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        if (!has_cache_) throw ContractViolation("conv1d_backward without a forward cache");
        const Tensor3<T>& x = cache_;
        const std::size_t oc_n = kernel_.shape[0];
        const std::size_t ic_n = kernel_.shape[1];
        const std::size_t k = kernel_.shape[2];
        const auto geo = conv_geometry(x.length, k, stride_, pad_);
        if (grad_out.batch != x.batch || grad_out.channels != oc_n || grad_out.length != geo.out_length) {
            throw ContractViolation("conv1d_backward: grad_out shape differs from forward output");
        }
        const auto L = static_cast<std::ptrdiff_t>(x.length);
        Tensor3<T> grad_x(x.batch, ic_n, x.length);
        for (std::size_t b = 0; b < x.batch; ++b) {
            for (std::size_t oc = 0; oc < oc_n; ++oc) {
                const auto g = grad_out.row(b, oc);
                T bias_acc{0};
                for (const T v : g) bias_acc += v;
                bias_.grad[oc] += bias_acc;
                for (std::size_t ic = 0; ic < ic_n; ++ic) {
                    const auto in = x.row(b, ic);
                    auto gx = grad_x.row(b, ic);
                    const std::size_t w_off = (oc * ic_n + ic) * k;
                    const T* w = kernel_.value.data() + w_off;
                    T* gw = kernel_.grad.data() + w_off;
                    for (std::size_t o = 0; o < geo.out_length; ++o) {
                        const T go = g[o];
                        if (go == T{0}) continue;
                        const std::ptrdiff_t start =
                            static_cast<std::ptrdiff_t>(o * stride_) - static_cast<std::ptrdiff_t>(geo.pad_left);
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(kk);
                            if (idx < 0 || idx >= L) continue;
                            gw[kk] += go * in[static_cast<std::size_t>(idx)];
                            gx[static_cast<std::size_t>(idx)] += go * w[kk];
                        }
                    }
                }
            }
        }
        return grad_x;
    }

    Param<T>& kernel() { return kernel_; }
    Param<T>& bias() { return bias_; }
    const Param<T>& kernel() const { return kernel_; }
    const Param<T>& bias() const { return bias_; }
    std::size_t stride() const { return stride_; }

    std::size_t output_length(std::size_t length) const {
        return conv_geometry(length, kernel_.shape[2], stride_, pad_).out_length;
    }

private:
    Param<T> kernel_;
    Param<T> bias_;
    std::size_t stride_ = 1;
    Padding pad_ = Padding::Same;
    Tensor3<T> cache_;
    bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Batch normalization

template <class T>
class BatchNorm1d {
public:
    BatchNorm1d() = default;
    explicit BatchNorm1d(std::size_t channels, double momentum = 0.1, double eps = 1e-5)
        : scale_({channels}, T{1}),
          shift_({channels}, T{0}),
          running_mean_(channels, T{0}),
          running_var_(channels, T{1}),
          momentum_(momentum),
          eps_(eps) {}

    std::size_t channels() const { return running_mean_.size(); }

    Tensor3<T> infer(const Tensor3<T>& x) const {
        check_channels(x);
        Tensor3<T> y(x.batch, x.channels, x.length);
        for (std::size_t c = 0; c < x.channels; ++c) {
            const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
            const T a = static_cast<T>(static_cast<double>(scale_.value[c]) * inv_std);
            const T b = static_cast<T>(static_cast<double>(shift_.value[c]) -
                                       static_cast<double>(running_mean_[c]) * static_cast<double>(a));
            for (std::size_t n = 0; n < x.batch; ++n) {
                const auto in = x.row(n, c);
                auto out = y.row(n, c);
                for (std::size_t i = 0; i < x.length; ++i) out[i] = a * in[i] + b;
            }
        }
        return y;
    }

    /// Normalizes with batch statistics. update_stats=false leaves running
    /// statistics untouched (used for loss probes).
    Tensor3<T> forward(const Tensor3<T>& x, bool update_stats = true) {
        check_channels(x);
        const std::size_t count = x.batch * x.length;
        if (count == 0) throw ContractViolation("batchnorm_forward on an empty tensor");
        xhat_ = Tensor3<T>(x.batch, x.channels, x.length);
        inv_std_.assign(x.channels, T{0});
        Tensor3<T> y(x.batch, x.channels, x.length);
        for (std::size_t c = 0; c < x.channels; ++c) {
            double sum = 0.0;
            for (std::size_t n = 0; n < x.batch; ++n)
                for (const T v : x.row(n, c)) sum += v;
            const double mean = sum / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t n = 0; n < x.batch; ++n)
                for (const T v : x.row(n, c)) sq += (v - mean) * (v - mean);
            const double var = sq / static_cast<double>(count);
            const double inv_std = 1.0 / std::sqrt(var + eps_);
            inv_std_[c] = static_cast<T>(inv_std);
            for (std::size_t n = 0; n < x.batch; ++n) {
                const auto in = x.row(n, c);
                auto xh = xhat_.row(n, c);
                auto out = y.row(n, c);
                for (std::size_t i = 0; i < x.length; ++i) {
                    xh[i] = static_cast<T>((in[i] - mean) * inv_std);
                    out[i] = scale_.value[c] * xh[i] + shift_.value[c];
                }
            }
            if (update_stats) {
                const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
                running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
                running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
            }
        }
        has_cache_ = true;
        return y;
    }

    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        if (!has_cache_) throw ContractViolation("batchnorm_backward requires a train-mode forward");
        if (!grad_out.same_shape(xhat_)) throw ContractViolation("batchnorm_backward: grad_out shape mismatch");
        const double count = static_cast<double>(grad_out.batch * grad_out.length);
        Tensor3<T> grad_x(grad_out.batch, grad_out.channels, grad_out.length);
        for (std::size_t c = 0; c < grad_out.channels; ++c) {
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (std::size_t n = 0; n < grad_out.batch; ++n) {
                const auto g = grad_out.row(n, c);
                const auto xh = xhat_.row(n, c);
                for (std::size_t i = 0; i < grad_out.length; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
                }
            }
            shift_.grad[c] += static_cast<T>(sum_dy);
            scale_.grad[c] += static_cast<T>(sum_dy_xhat);
            const double gamma = scale_.value[c];
            const double k = gamma * inv_std_[c] / count;
            for (std::size_t n = 0; n < grad_out.batch; ++n) {
                const auto g = grad_out.row(n, c);
                const auto xh = xhat_.row(n, c);
                auto gx = grad_x.row(n, c);
                for (std::size_t i = 0; i < grad_out.length; ++i) {
                    gx[i] = static_cast<T>(k * (count * g[i] - sum_dy - xh[i] * sum_dy_xhat));
                }
            }
        }
        return grad_x;
    }

    Param<T>& scale() { return scale_; }
    Param<T>& shift() { return shift_; }
    const Param<T>& scale() const { return scale_; }
    const Param<T>& shift() const { return shift_; }
    std::vector<T>& running_mean() { return running_mean_; }
    std::vector<T>& running_var() { return running_var_; }
    const std::vector<T>& running_mean() const { return running_mean_; }
    const std::vector<T>& running_var() const { return running_var_; }
    double momentum() const { return momentum_; }
    double eps() const { return eps_; }

private:
    void check_channels(const Tensor3<T>& x) const {
        if (x.channels != running_mean_.size()) throw ContractViolation("batchnorm: channel count mismatch");
    }

    Param<T> scale_;
    Param<T> shift_;
    std::vector<T> running_mean_;
    std::vector<T> running_var_;
    double momentum_ = 0.1;
    double eps_ = 1e-5;
    Tensor3<T> xhat_;
    std::vector<T> inv_std_;
    bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Elementwise activations

template <class T>
Tensor3<T> relu_forward(const Tensor3<T>& x) {
    Tensor3<T> y = x;
    for (auto& v : y.data) v = v > T{0} ? v : T{0};
    return y;
}

/// Gradient passes only where x > 0; the subgradient at exactly 0 is 0.
template <class T>
Tensor3<T> relu_backward(const Tensor3<T>& grad_out, const Tensor3<T>& x) {
    if (!grad_out.same_shape(x)) throw ContractViolation("relu_backward: shape mismatch");
    Tensor3<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(x.data[i] > T{0})) g.data[i] = T{0};
    }
    return g;
}

template <class T>
T softplus(T x) {
    return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T sigmoid(T x) {
    if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

template <class T>
Tensor3<T> softplus_forward(const Tensor3<T>& x) {
    Tensor3<T> y = x;
    for (auto& v : y.data) v = softplus(v);
    return y;
}

template <class T>
Tensor3<T> softplus_backward(const Tensor3<T>& grad_out, const Tensor3<T>& x) {
    if (!grad_out.same_shape(x)) throw ContractViolation("softplus_backward: shape mismatch");
    Tensor3<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= sigmoid(x.data[i]);
    return g;
}

// ---------------------------------------------------------------------------
// Pooling

/// Windowed max pooling. Backward routes each window's gradient to the first
/// maximal element.
template <class T>
class MaxPool1d {
public:
    MaxPool1d() = default;
    MaxPool1d(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {}

    std::size_t output_length(std::size_t length) const {
        if (window_ == 0 || stride_ == 0) throw ContractViolation("maxpool: window and stride must be positive");
        if (length < window_) throw ContractViolation("maxpool: window larger than input");
        return (length - window_) / stride_ + 1;
    }

    Tensor3<T> infer(const Tensor3<T>& x) const { return run(x, nullptr); }

    Tensor3<T> forward(const Tensor3<T>& x) {
        in_length_ = x.length;
        return run(x, &argmax_);
    }

    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        if (argmax_.size() != grad_out.size()) throw ContractViolation("maxpool_backward without matching forward");
        Tensor3<T> grad_x(grad_out.batch, grad_out.channels, in_length_);
        for (std::size_t i = 0; i < grad_out.size(); ++i) {
            const std::size_t row = i / grad_out.length;
            grad_x.data[row * in_length_ + argmax_[i]] += grad_out.data[i];
        }
        return grad_x;
    }

private:
    Tensor3<T> run(const Tensor3<T>& x, std::vector<std::size_t>* argmax) const {
        const std::size_t out_len = output_length(x.length);
        Tensor3<T> y(x.batch, x.channels, out_len);
        if (argmax) argmax->assign(y.size(), 0);
        for (std::size_t r = 0; r < x.batch * x.channels; ++r) {
            const T* in = x.data.data() + r * x.length;
            for (std::size_t o = 0; o < out_len; ++o) {
                const std::size_t start = o * stride_;
                std::size_t best = start;
                for (std::size_t j = start + 1; j < start + window_; ++j) {
                    if (in[j] > in[best]) best = j;
                }
                y.data[r * out_len + o] = in[best];
                if (argmax) (*argmax)[r * out_len + o] = best;
            }
        }
        return y;
    }

    std::size_t window_ = 2;
    std::size_t stride_ = 2;
    std::size_t in_length_ = 0;
    std::vector<std::size_t> argmax_;
};

/// Max over the whole spatial axis; output length 1.
template <class T>
class GlobalMaxPool {
public:
    Tensor3<T> infer(const Tensor3<T>& x) const { return run(x, nullptr); }

    Tensor3<T> forward(const Tensor3<T>& x) {
        in_length_ = x.length;
        return run(x, &argmax_);
    }

    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        if (grad_out.length != 1 || argmax_.size() != grad_out.size()) {
            throw ContractViolation("global_maxpool_backward without matching forward");
        }
        Tensor3<T> grad_x(grad_out.batch, grad_out.channels, in_length_);
        for (std::size_t r = 0; r < grad_out.size(); ++r) {
            grad_x.data[r * in_length_ + argmax_[r]] = grad_out.data[r];
        }
        return grad_x;
    }

private:
    Tensor3<T> run(const Tensor3<T>& x, std::vector<std::size_t>* argmax) const {
        if (x.length == 0) throw ContractViolation("global max pool over empty spatial axis");
        Tensor3<T> y(x.batch, x.channels, 1);
        if (argmax) argmax->assign(y.size(), 0);
        for (std::size_t r = 0; r < x.batch * x.channels; ++r) {
            const T* in = x.data.data() + r * x.length;
            std::size_t best = 0;
            for (std::size_t j = 1; j < x.length; ++j) {
                if (in[j] > in[best]) best = j;
            }
            y.data[r] = in[best];
            if (argmax) (*argmax)[r] = best;
        }
        return y;
    }

    std::size_t in_length_ = 0;
    std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------------------
// Fully connected

/// y = x W + b with x flattened to (batch, channels * length) and W [in, out].
/// The output is a Tensor3 of shape (batch, out, 1).
template <class T>
class Dense {
public:
    Dense() = default;
    Dense(std::size_t in_features, std::size_t out_features)
        : weight_({in_features, out_features}), bias_({out_features}) {}

    template <class Rng>
    void init(Rng& rng) {
        weight_.value = xavier_init<T>(weight_.size(), weight_.shape[0], weight_.shape[1], rng);
        std::fill(bias_.value.begin(), bias_.value.end(), T{0});
    }

    Tensor3<T> infer(const Tensor3<T>& x) const {
        const std::size_t in_f = weight_.shape[0];
        const std::size_t out_f = weight_.shape[1];
        if (x.channels * x.length != in_f) throw ContractViolation("dense_forward: feature count mismatch");
        Tensor3<T> y(x.batch, out_f, 1);
        for (std::size_t b = 0; b < x.batch; ++b) {
            const T* in = x.data.data() + b * in_f;
            for (std::size_t o = 0; o < out_f; ++o) {
                T acc = bias_.value[o];
                for (std::size_t i = 0; i < in_f; ++i) acc += in[i] * weight_.value[i * out_f + o];
                y.data[b * out_f + o] = acc;
            }
        }
        return y;
    }

    Tensor3<T> forward(const Tensor3<T>& x) {
        cache_ = x;
        has_cache_ = true;
        return infer(x);
    }

    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        if (!has_cache_) throw ContractViolation("dense_backward without a forward cache");
        const std::size_t in_f = weight_.shape[0];
        const std::size_t out_f = weight_.shape[1];
        if (grad_out.batch != cache_.batch || grad_out.channels * grad_out.length != out_f) {
            throw ContractViolation("dense_backward: grad_out shape mismatch");
        }
        Tensor3<T> grad_x(cache_.batch, cache_.channels, cache_.length);
        for (std::size_t b = 0; b < cache_.batch; ++b) {
            const T* in = cache_.data.data() + b * in_f;
            const T* g = grad_out.data.data() + b * out_f;
            T* gx = grad_x.data.data() + b * in_f;
            for (std::size_t o = 0; o < out_f; ++o) {
                bias_.grad[o] += g[o];
                for (std::size_t i = 0; i < in_f; ++i) {
                    weight_.grad[i * out_f + o] += in[i] * g[o];
                    gx[i] += weight_.value[i * out_f + o] * g[o];
                }
            }
        }
        return grad_x;
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }
    const Param<T>& weight() const { return weight_; }
    const Param<T>& bias() const { return bias_; }

private:
    Param<T> weight_;
    Param<T> bias_;
    Tensor3<T> cache_;
    bool has_cache_ = false;
};

}  // namespace betaunc
