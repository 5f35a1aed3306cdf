#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "betaunc/beta.hpp"
#include "betaunc/layers.hpp"
#include "betaunc/tensor.hpp"

namespace betaunc {

struct StemSpec {
    std::size_t kernel = 5;
    std::size_t channels = 8;
    std::size_t pool = 2;
    friend bool operator==(const StemSpec&, const StemSpec&) = default;
};

struct GroupSpec {
    std::size_t blocks = 2;
    std::size_t channels = 8;
    std::size_t kernel = 3;
    friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

struct ArchitectureSpec {
    std::string preset_name;
    std::size_t input_length = 2048;
    StemSpec stem;
    std::vector<GroupSpec> groups;
    std::size_t head_outputs = 2;

    /// Conv(5, 8) + pool 2, then seven residual groups down to length 8.
    static ArchitectureSpec paper();
    /// Desk-scale variant: input 256, two single-block groups.
    static ArchitectureSpec tiny();
    /// Throws UsageError for unknown names.
    static ArchitectureSpec from_preset(const std::string& name);

    /// Spatial length after the stem, after each group, and after global pooling.
    std::vector<std::size_t> spatial_chain() const;

    std::string to_json() const;
    static ArchitectureSpec from_json(const std::string& text);

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct ModelOptions {
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> data;
};

inline constexpr double kHeadFloor = 1e-6;

/// kHeadFloor rounded up to the nearest representable T.
template <class T>
T head_floor() {
    T f = static_cast<T>(kHeadFloor);
    if (static_cast<double>(f) < kHeadFloor) f = std::nextafter(f, T{1});
    return f;
}

namespace detail {

template <class T>
void add_inplace(Tensor3<T>& a, const Tensor3<T>& b) {
    if (!a.same_shape(b)) throw ContractViolation("residual add: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

template <class T>
NamedTensor export_values(const std::string& name, const std::vector<std::size_t>& shape, const std::vector<T>& v) {
    NamedTensor t{name, {}, {}};
    for (auto d : shape) t.shape.push_back(static_cast<std::uint32_t>(d));
    t.data.assign(v.begin(), v.end());
    return t;
}

}  // namespace detail

/// conv -> BN -> ReLU -> conv -> BN, plus shortcut, then ReLU. The shortcut is a
/// kernel-1 strided convolution whenever stride or channel count changes.
template <class T>
class ResidualBlock {
public:
    ResidualBlock(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                  const ModelOptions& opt)
        : conv1_(in_ch, out_ch, kernel, stride),
          bn1_(out_ch, opt.bn_momentum, opt.bn_eps),
          conv2_(out_ch, out_ch, kernel, 1),
          bn2_(out_ch, opt.bn_momentum, opt.bn_eps) {
        if (stride != 1 || in_ch != out_ch) {
            projection_.emplace(in_ch, out_ch, 1, stride);
        }
    }

    template <class Rng>
    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (projection_) projection_->init(rng);
    }

    Tensor3<T> infer(const Tensor3<T>& x) const {
        Tensor3<T> h = relu_forward(bn1_.infer(conv1_.infer(x)));
        Tensor3<T> z = bn2_.infer(conv2_.infer(h));
        detail::add_inplace(z, projection_ ? projection_->infer(x) : x);
        return relu_forward(z);
    }

    Tensor3<T> forward(const Tensor3<T>& x, bool update_stats) {
        pre_relu1_ = bn1_.forward(conv1_.forward(x), update_stats);
        Tensor3<T> z = bn2_.forward(conv2_.forward(relu_forward(pre_relu1_)), update_stats);
        detail::add_inplace(z, projection_ ? projection_->forward(x) : x);
        pre_relu2_ = std::move(z);
        return relu_forward(pre_relu2_);
    }

    Tensor3<T> backward(const Tensor3<T>& grad_out) {
        const Tensor3<T> gz = relu_backward(grad_out, pre_relu2_);
        Tensor3<T> g = bn2_.backward(gz);
        g = conv2_.backward(g);
        g = relu_backward(g, pre_relu1_);
        g = bn1_.backward(g);
        g = conv1_.backward(g);
        detail::add_inplace(g, projection_ ? projection_->backward(gz) : gz);
        return g;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&conv1_.kernel());
        out.push_back(&conv1_.bias());
        out.push_back(&bn1_.scale());
        out.push_back(&bn1_.shift());
        out.push_back(&conv2_.kernel());
        out.push_back(&conv2_.bias());
        out.push_back(&bn2_.scale());
        out.push_back(&bn2_.shift());
        if (projection_) {
            out.push_back(&projection_->kernel());
            out.push_back(&projection_->bias());
        }
    }

    template <class Visitor>
    void visit(const std::string& prefix, Visitor&& v) {
        v.conv(prefix + ".conv1", conv1_);
        v.bn(prefix + ".bn1", bn1_);
        v.conv(prefix + ".conv2", conv2_);
        v.bn(prefix + ".bn2", bn2_);
        if (projection_) v.conv(prefix + ".shortcut", *projection_);
    }

    std::size_t output_length(std::size_t length) const { return conv1_.output_length(length); }

private:
    Conv1d<T> conv1_;
    BatchNorm1d<T> bn1_;
    Conv1d<T> conv2_;
    BatchNorm1d<T> bn2_;
    std::optional<Conv1d<T>> projection_;
    Tensor3<T> pre_relu1_;
    Tensor3<T> pre_relu2_;
};

/// Convolutional network mapping fixed-length crops to beta parameters.
template <class T>
class BasicModel {
public:
    BasicModel(ArchitectureSpec spec, std::uint64_t seed, ModelOptions options = {})
        : spec_(std::move(spec)), seed_(seed), options_(options) {
        const auto& st = spec_.stem;
        stem_conv_ = Conv1d<T>(1, st.channels, st.kernel, 1);
        stem_pool_ = MaxPool1d<T>(st.pool, st.pool);
        stem_bn_ = BatchNorm1d<T>(st.channels, options_.bn_momentum, options_.bn_eps);
        std::size_t in_ch = st.channels;
        groups_.reserve(spec_.groups.size());
        for (const auto& g : spec_.groups) {
            std::vector<ResidualBlock<T>> blocks;
            for (std::size_t b = 0; b < g.blocks; ++b) {
                blocks.emplace_back(b == 0 ? in_ch : g.channels, g.channels, g.kernel, b == 0 ? 2 : 1, options_);
            }
            groups_.push_back(std::move(blocks));
            in_ch = g.channels;
        }
        dense_ = Dense<T>(in_ch, spec_.head_outputs);

        std::mt19937_64 rng(seed_);
        stem_conv_.init(rng);
        for (auto& g : groups_)
            for (auto& b : g) b.init(rng);
        dense_.init(rng);
    }

    const ArchitectureSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const ModelOptions& options() const { return options_; }
    AdamState& optimizer() { return adam_; }
    const AdamState& optimizer() const { return adam_; }

    /// Free-form key/value echo of the run configuration, stored in checkpoints.
    std::map<std::string, std::string>& config_echo() { return config_echo_; }
    const std::map<std::string, std::string>& config_echo() const { return config_echo_; }

    /// Infer-mode head outputs (after softplus and flooring), shape (batch, 2, 1).
    /// Const and cache-free.
    Tensor3<T> infer_head(const Tensor3<T>& crops, std::vector<std::size_t>* spatial = nullptr) const {
        check_input(crops);
        Tensor3<T> h = relu_forward(stem_bn_.infer(stem_pool_.infer(stem_conv_.infer(crops))));
        if (spatial) spatial->push_back(h.length);
        for (const auto& g : groups_) {
            for (const auto& b : g) h = b.infer(h);
            if (spatial) spatial->push_back(h.length);
        }
        h = gmp_.infer(h);
        if (spatial) spatial->push_back(h.length);
        Tensor3<T> out = softplus_forward(dense_.infer(h));
        for (auto& v : out.data) v = std::max(v, head_floor<T>());
        check_finite(out, "model head");
        return out;
    }

    std::vector<BetaParams> predict(const Tensor3<T>& crops) const { return to_params(infer_head(crops)); }

    /// Spatial lengths observed in an actual infer pass.
    std::vector<std::size_t> trace_spatial_sizes(const Tensor3<T>& crops) const {
        std::vector<std::size_t> sizes;
        infer_head(crops, &sizes);
        return sizes;
    }

    /// Forward with per-layer caches. Train mode uses batch statistics.
    std::vector<BetaParams> forward(const Tensor3<T>& crops, Mode mode, bool update_stats = true) {
        if (mode == Mode::Infer) return predict(crops);
        return to_params(forward_train(crops, update_stats));
    }

    /// Mean beta negative log-likelihood of clipped targets; zeroes and then fills
    /// every parameter gradient. Train-mode batch statistics.
    double loss_and_grads(const Tensor3<T>& crops, const std::vector<double>& targets, double label_eps) {
        if (crops.batch == 0) throw DomainError("loss_and_grads on an empty batch");
        if (targets.size() != crops.batch) throw ContractViolation("loss_and_grads: one target per crop required");
        for (Param<T>* p : params()) p->zero_grad();

        const Tensor3<T> head = forward_train(crops, true);
        const double inv_n = 1.0 / static_cast<double>(crops.batch);
        double loss = 0.0;
        Tensor3<T> grad_head(crops.batch, spec_.head_outputs, 1);
        for (std::size_t b = 0; b < crops.batch; ++b) {
            const double a = head.data[2 * b];
            const double be = head.data[2 * b + 1];
            const BetaParams p(a, be);
            const double t = clip_label(targets[b], label_eps);
            loss -= beta_log_pdf(t, p);
            const auto g = beta_nll_grad(t, p);
            const T za = head_logits_.data[2 * b];
            const T zb = head_logits_.data[2 * b + 1];
            // the floor is flat, so no gradient flows through floored outputs
            const bool a_live = softplus(za) >= head_floor<T>();
            const bool b_live = softplus(zb) >= head_floor<T>();
            grad_head.data[2 * b] = a_live ? static_cast<T>(g.d_alpha * inv_n * sigmoid<double>(za)) : T{0};
            grad_head.data[2 * b + 1] = b_live ? static_cast<T>(g.d_beta * inv_n * sigmoid<double>(zb)) : T{0};
        }
        backward_from_logits(grad_head);
        return loss * inv_n;
    }

    /// Mean NLL without touching gradients or running statistics.
    double evaluate_loss(const Tensor3<T>& crops, const std::vector<double>& targets, double label_eps, Mode mode) {
        if (crops.batch == 0) throw DomainError("evaluate_loss on an empty batch");
        if (targets.size() != crops.batch) throw ContractViolation("evaluate_loss: one target per crop required");
        const auto params_out = mode == Mode::Infer ? predict(crops) : to_params(forward_train(crops, false));
        double loss = 0.0;
        for (std::size_t b = 0; b < crops.batch; ++b) loss -= beta_log_pdf(clip_label(targets[b], label_eps), params_out[b]);
        return loss / static_cast<double>(crops.batch);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out{&stem_conv_.kernel(), &stem_conv_.bias(), &stem_bn_.scale(), &stem_bn_.shift()};
        for (auto& g : groups_)
            for (auto& b : g) b.collect(out);
        out.push_back(&dense_.weight());
        out.push_back(&dense_.bias());
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (Param<T>* p : const_cast<BasicModel*>(this)->params()) n += p->size();
        return n;
    }

    /// Every parameter and running statistic, in a fixed order.
    std::vector<NamedTensor> named_tensors() const {
        Exporter ex;
        const_cast<BasicModel*>(this)->visit(ex);
        return std::move(ex.out);
    }

    /// Inverse of named_tensors(). Throws ContractViolation naming the first
    /// missing or mis-shaped entry.
    void load_named_tensors(const std::vector<NamedTensor>& tensors) {
        Importer im{tensors, {}};
        for (std::size_t i = 0; i < tensors.size(); ++i) im.index[tensors[i].name] = i;
        visit(im);
        if (im.index.size() != tensors.size()) throw ContractViolation("duplicate tensor names");
        if (im.used != tensors.size()) throw ContractViolation("unexpected extra tensors");
    }

    template <class U>
    BasicModel<U> cast() const {
        BasicModel<U> other(spec_, seed_, options_);
        other.load_named_tensors(named_tensors());
        other.optimizer() = adam_;
        other.config_echo() = config_echo_;
        return other;
    }

private:
    struct Exporter {
        std::vector<NamedTensor> out;
        void conv(const std::string& name, Conv1d<T>& c) {
            out.push_back(detail::export_values(name + ".weight", c.kernel().shape, c.kernel().value));
            out.push_back(detail::export_values(name + ".bias", c.bias().shape, c.bias().value));
        }
        void bn(const std::string& name, BatchNorm1d<T>& b) {
            out.push_back(detail::export_values(name + ".scale", b.scale().shape, b.scale().value));
            out.push_back(detail::export_values(name + ".shift", b.shift().shape, b.shift().value));
            out.push_back(detail::export_values(name + ".running_mean", b.scale().shape, b.running_mean()));
            out.push_back(detail::export_values(name + ".running_var", b.scale().shape, b.running_var()));
        }
        void dense(const std::string& name, Dense<T>& d) {
            out.push_back(detail::export_values(name + ".weight", d.weight().shape, d.weight().value));
            out.push_back(detail::export_values(name + ".bias", d.bias().shape, d.bias().value));
        }
    };

    struct Importer {
        const std::vector<NamedTensor>& tensors;
        std::map<std::string, std::size_t> index;
        std::size_t used = 0;

        void fill(const std::string& name, const std::vector<std::size_t>& shape, std::vector<T>& dst) {
            auto it = index.find(name);
            if (it == index.end()) throw ContractViolation("missing tensor '" + name + "'");
            const NamedTensor& t = tensors[it->second];
            std::vector<std::size_t> got(t.shape.begin(), t.shape.end());
            if (got != shape || t.data.size() != dst.size()) {
                throw ContractViolation("tensor '" + name + "' has the wrong shape");
            }
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(t.data[i]);
            ++used;
        }
        void conv(const std::string& name, Conv1d<T>& c) {
            fill(name + ".weight", c.kernel().shape, c.kernel().value);
            fill(name + ".bias", c.bias().shape, c.bias().value);
        }
        void bn(const std::string& name, BatchNorm1d<T>& b) {
            fill(name + ".scale", b.scale().shape, b.scale().value);
            fill(name + ".shift", b.shift().shape, b.shift().value);
            fill(name + ".running_mean", b.scale().shape, b.running_mean());
            fill(name + ".running_var", b.scale().shape, b.running_var());
        }
        void dense(const std::string& name, Dense<T>& d) {
            fill(name + ".weight", d.weight().shape, d.weight().value);
            fill(name + ".bias", d.bias().shape, d.bias().value);
        }
    };

    template <class Visitor>
    void visit(Visitor& v) {
        v.conv("stem.conv", stem_conv_);
        v.bn("stem.bn", stem_bn_);
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            for (std::size_t b = 0; b < groups_[g].size(); ++b) {
                groups_[g][b].visit("group" + std::to_string(g) + ".block" + std::to_string(b), v);
            }
        }
        v.dense("head.dense", dense_);
    }

    void check_input(const Tensor3<T>& crops) const {
        if (crops.channels != 1 || crops.length != spec_.input_length) {
            throw ContractViolation("model expects crops of shape (batch, 1, " + std::to_string(spec_.input_length) +
                                    "), got (" + std::to_string(crops.batch) + ", " + std::to_string(crops.channels) +
                                    ", " + std::to_string(crops.length) + ")");
        }
    }

    Tensor3<T> forward_train(const Tensor3<T>& crops, bool update_stats) {
        check_input(crops);
        stem_pre_relu_ = stem_bn_.forward(stem_pool_.forward(stem_conv_.forward(crops)), update_stats);
        Tensor3<T> h = relu_forward(stem_pre_relu_);
        for (auto& g : groups_)
            for (auto& b : g) h = b.forward(h, update_stats);
        head_logits_ = dense_.forward(gmp_.forward(h));
        Tensor3<T> out = softplus_forward(head_logits_);
        for (auto& v : out.data) v = std::max(v, head_floor<T>());
        check_finite(out, "model head");
        return out;
    }

    void backward_from_logits(const Tensor3<T>& grad_head) {
        const Tensor3<T> grad_logits = grad_head;  // already multiplied by the softplus derivative
        Tensor3<T> g = gmp_.backward(dense_.backward(grad_logits));
        for (auto git = groups_.rbegin(); git != groups_.rend(); ++git)
            for (auto bit = git->rbegin(); bit != git->rend(); ++bit) g = bit->backward(g);
        g = relu_backward(g, stem_pre_relu_);
        g = stem_conv_.backward(stem_pool_.backward(stem_bn_.backward(g)));
    }

    static std::vector<BetaParams> to_params(const Tensor3<T>& head) {
        std::vector<BetaParams> out;
        out.reserve(head.batch);
        for (std::size_t b = 0; b < head.batch; ++b) {
            out.emplace_back(static_cast<double>(head.data[2 * b]), static_cast<double>(head.data[2 * b + 1]));
        }
        return out;
    }

    ArchitectureSpec spec_;
    std::uint64_t seed_;
    ModelOptions options_;
    AdamState adam_;
    std::map<std::string, std::string> config_echo_;

    Conv1d<T> stem_conv_;
    MaxPool1d<T> stem_pool_;
    BatchNorm1d<T> stem_bn_;
    std::vector<std::vector<ResidualBlock<T>>> groups_;
    GlobalMaxPool<T> gmp_;
    Dense<T> dense_;

    Tensor3<T> stem_pre_relu_;
    Tensor3<T> head_logits_;
};

using Model = BasicModel<float>;

/// Builds a freshly initialized model from a preset name ("paper" or "tiny").
Model build_model(const std::string& preset, std::uint64_t seed, ModelOptions options = {});

}  // namespace betaunc
