#include "odor/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "odor/core/errors.hpp"
#include "odor/core/seed.hpp"

namespace odor::nn {

namespace {

std::string join(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

template <typename T>
Parameter<T> make_parameter(std::string name, Shape shape, InitRule init, std::size_t fan_in) {
    const T fill = init == InitRule::ones ? T(1) : T(0);
    return {std::move(name), Tensor<T>::full(std::move(shape), fill, true), init, fan_in};
}

template <typename T>
void require_rank3(const Tensor<T>& x, const char* layer) {
    if (x.rank() != 3)
        throw ShapeError(std::string(layer) + " expects (N, C, L) input, got " + to_string(x.shape()));
}

template <typename T>
void require_channels(const Tensor<T>& x, std::size_t channels, const char* layer) {
    require_rank3(x, layer);
    if (x.dim(1) != channels)
        throw ShapeError(std::string(layer) + " expects " + std::to_string(channels) + " channels, got " +
                         to_string(x.shape()));
}

}  // namespace

std::string_view kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::batchnorm1d: return "batchnorm1d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool1d: return "maxpool1d";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::linear: return "linear";
        case LayerKind::dropout: return "dropout";
        case LayerKind::se_attention: return "se_attention";
        case LayerKind::spatial_attention: return "spatial_attention";
        case LayerKind::residual_block: return "residual_block";
        case LayerKind::concat_branches: return "concat_branches";
        case LayerKind::sequential: return "sequential";
    }
    return "unknown";
}

void LayerSpec::validate() const {
    const std::string name(kind_name(kind));
    switch (kind) {
        case LayerKind::conv1d:
            if (in_channels == 0 || out_channels == 0) throw InvalidArgument(name + ": channels must be positive");
            if (kernel == 0) throw InvalidArgument(name + ": kernel must be positive");
            if (stride == 0) throw InvalidArgument(name + ": stride must be >= 1");
            break;
        case LayerKind::maxpool1d:
            if (kernel == 0 || stride == 0) throw InvalidArgument(name + ": kernel and stride must be >= 1");
            break;
        case LayerKind::linear:
        case LayerKind::batchnorm1d:
        case LayerKind::residual_block:
            if (in_channels == 0 || out_channels == 0) throw InvalidArgument(name + ": sizes must be positive");
            break;
        case LayerKind::dropout:
            if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument(name + ": rate must be in [0, 1)");
            break;
        case LayerKind::se_attention:
            if (in_channels == 0 || reduction == 0) throw InvalidArgument(name + ": channels and reduction must be >= 1");
            break;
        case LayerKind::spatial_attention:
            if (kernel == 0 || kernel % 2 == 0) throw InvalidArgument(name + ": kernel must be odd");
            break;
        default:
            break;
    }
}

std::string LayerSpec::describe() const {
    std::ostringstream os;
    os << kind_name(kind);
    switch (kind) {
        case LayerKind::conv1d:
            os << '(' << in_channels << "->" << out_channels << ",k" << kernel << ",s" << stride << ",p" << padding
               << (bias ? "" : ",nobias") << ')';
            break;
        case LayerKind::maxpool1d: os << "(k" << kernel << ",s" << stride << ')'; break;
        case LayerKind::linear: os << '(' << in_channels << "->" << out_channels << ')'; break;
        case LayerKind::batchnorm1d:
        case LayerKind::residual_block: os << '(' << in_channels << ')'; break;
        case LayerKind::dropout: os << '(' << rate << ')'; break;
        case LayerKind::se_attention: os << '(' << in_channels << ",r" << reduction << ')'; break;
        case LayerKind::spatial_attention: os << "(k" << kernel << ')'; break;
        default: break;
    }
    return os.str();
}

template <typename T>
void Module<T>::collect(const std::string&, StateList<T>&) {}

template <typename T>
std::string Module<T>::describe() const {
    return spec().describe();
}

// Conv1d -------------------------------------------------------------------

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding, bool has_bias)
    : spec_{LayerKind::conv1d, in_channels, out_channels, kernel, stride, padding, 0, 0.0, has_bias} {
    spec_.validate();
    weight = make_parameter<T>("weight", {out_channels, in_channels, kernel}, InitRule::kaiming_normal,
                               in_channels * kernel);
    if (has_bias) bias = make_parameter<T>("bias", {out_channels}, InitRule::zeros, 1);
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x, ForwardContext&) {
    require_channels(x, spec_.in_channels, "conv1d");
    if (spec_.bias) return conv1d(x, weight.value, bias.value, spec_.stride, spec_.padding);
    // Bias-free convs still run the shared kernel, with a constant zero bias.
    return conv1d(x, weight.value, Tensor<T>::zeros({spec_.out_channels}), spec_.stride, spec_.padding);
}

template <typename T>
void Conv1d<T>::collect(const std::string& prefix, StateList<T>& out) {
    out.parameters.emplace_back(join(prefix, weight.name), &weight);
    if (spec_.bias) out.parameters.emplace_back(join(prefix, bias.name), &bias);
}

// BatchNorm1d --------------------------------------------------------------

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels)
    : gamma(make_parameter<T>("gamma", {channels}, InitRule::ones, 1)),
      beta(make_parameter<T>("beta", {channels}, InitRule::zeros, 1)),
      running_mean(Tensor<T>::zeros({channels})),
      running_var(Tensor<T>::full({channels}, T(1))),
      channels_(channels) {
    spec().validate();
}

template <typename T>
LayerSpec BatchNorm1d<T>::spec() const {
    return {LayerKind::batchnorm1d, channels_, channels_};
}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    require_channels(x, channels_, "batchnorm1d");
    const Shape affine_shape{1, channels_, 1};
    const auto g = reshape(gamma.value, affine_shape);
    const auto b = reshape(beta.value, affine_shape);
    const T eps = static_cast<T>(kEpsilon);

    if (ctx.training()) {
        const std::size_t count = x.dim(0) * x.dim(2);
        if (count < 2) throw InvalidArgument("batchnorm1d: training mode needs N * L >= 2 per channel");
        const auto mu = mean(x, {0, 2}, true);
        const auto centered = sub(x, mu);
        const auto var = mean(mul(centered, centered), {0, 2}, true);
        const auto normalized = div(centered, sqrt(add_scalar(var, eps)));
        {
            const T m = static_cast<T>(kMomentum);
            const T unbias = static_cast<T>(static_cast<double>(count) / static_cast<double>(count - 1));
            auto rm = running_mean.mutable_data();
            auto rv = running_var.mutable_data();
            for (std::size_t c = 0; c < channels_; ++c) {
                rm[c] = (T(1) - m) * rm[c] + m * mu.data()[c];
                rv[c] = (T(1) - m) * rv[c] + m * var.data()[c] * unbias;
            }
        }
        return add(mul(normalized, g), b);
    }
    const auto rm = reshape(running_mean, affine_shape);
    const auto rv = reshape(running_var, affine_shape);
    return add(mul(div(sub(x, rm), sqrt(add_scalar(rv, eps))), g), b);
}

template <typename T>
void BatchNorm1d<T>::collect(const std::string& prefix, StateList<T>& out) {
    out.parameters.emplace_back(join(prefix, gamma.name), &gamma);
    out.parameters.emplace_back(join(prefix, beta.name), &beta);
    out.buffers.emplace_back(join(prefix, "running_mean"), &running_mean);
    out.buffers.emplace_back(join(prefix, "running_var"), &running_var);
}

// Stateless layers ---------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, ForwardContext&) {
    return relu(x);
}

template <typename T>
MaxPool1d<T>::MaxPool1d(std::size_t stride, std::size_t kernel)
    : spec_{LayerKind::maxpool1d, 0, 0, kernel == 0 ? stride : kernel, stride} {
    spec_.validate();
}

template <typename T>
Tensor<T> MaxPool1d<T>::forward(const Tensor<T>& x, ForwardContext&) {
    require_rank3(x, "maxpool1d");
    if (x.dim(2) < spec_.kernel)
        throw ShapeError("maxpool1d: kernel " + std::to_string(spec_.kernel) + " exceeds length of " +
                         to_string(x.shape()));
    return maxpool1d(x, spec_.kernel, spec_.stride);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, ForwardContext&) {
    require_rank3(x, "global_avg_pool");
    return mean(x, {2}, false);
}

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features)
    : weight(make_parameter<T>("weight", {in_features, out_features}, InitRule::kaiming_normal, in_features)),
      bias(make_parameter<T>("bias", {out_features}, InitRule::zeros, 1)),
      spec_{LayerKind::linear, in_features, out_features} {
    spec_.validate();
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, ForwardContext&) {
    if (x.rank() != 2 || x.dim(1) != spec_.in_channels)
        throw ShapeError("linear expects (N, " + std::to_string(spec_.in_channels) + "), got " + to_string(x.shape()));
    return add(matmul(x, weight.value), bias.value);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, StateList<T>& out) {
    out.parameters.emplace_back(join(prefix, weight.name), &weight);
    out.parameters.emplace_back(join(prefix, bias.name), &bias);
}

template <typename T>
Dropout<T>::Dropout(double rate) : spec_{LayerKind::dropout} {
    spec_.rate = rate;
    spec_.validate();
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    if (!ctx.training() || !ctx.dropout || spec_.rate == 0.0) return x;
    if (!ctx.rng) throw InvalidArgument("dropout in train mode needs an RNG in the forward context");
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - spec_.rate));
    std::vector<T> mask(x.numel());
    for (auto& m : mask) m = uniform(*ctx.rng) < spec_.rate ? T(0) : keep_scale;
    return mul(x, Tensor<T>::from(x.shape(), std::move(mask)));
}

// Attention ----------------------------------------------------------------

template <typename T>
SEAttention<T>::SEAttention(std::size_t channels, std::size_t reduction)
    : spec_{LayerKind::se_attention, channels, channels, 0, 1, 0, reduction},
      hidden_(std::max<std::size_t>(1, reduction == 0 ? 0 : channels / reduction)) {
    spec_.validate();
    squeeze = make_parameter<T>("squeeze", {channels, hidden_}, InitRule::kaiming_normal, channels);
    excite = make_parameter<T>("excite", {hidden_, channels}, InitRule::kaiming_normal, hidden_);
}

template <typename T>
Tensor<T> SEAttention<T>::forward(const Tensor<T>& x, ForwardContext&) {
    require_channels(x, spec_.in_channels, "se_attention");
    const auto pooled = mean(x, {2}, false);
    const auto gate = sigmoid(matmul(relu(matmul(pooled, squeeze.value)), excite.value));
    return mul(x, reshape(gate, {x.dim(0), x.dim(1), 1}));
}

template <typename T>
void SEAttention<T>::collect(const std::string& prefix, StateList<T>& out) {
    out.parameters.emplace_back(join(prefix, squeeze.name), &squeeze);
    out.parameters.emplace_back(join(prefix, excite.name), &excite);
}

template <typename T>
SpatialAttention<T>::SpatialAttention(std::size_t kernel)
    : conv(2, 1, kernel == 0 ? 1 : kernel, 1, kernel / 2, true), spec_{LayerKind::spatial_attention} {
    spec_.kernel = kernel;
    spec_.padding = kernel / 2;
    spec_.validate();
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    require_rank3(x, "spatial_attention");
    const auto maps = concat<T>({mean(x, {1}, true), max(x, 1, true)}, 1);
    const auto gate = sigmoid(conv.forward(maps, ctx));
    return mul(x, gate);
}

template <typename T>
void SpatialAttention<T>::collect(const std::string& prefix, StateList<T>& out) {
    conv.collect(join(prefix, "conv"), out);
}

// Residual -----------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(std::size_t channels)
    : conv1(channels, channels, 3, 1, 1, false),
      bn1(channels),
      conv2(channels, channels, 3, 1, 1, false),
      bn2(channels),
      channels_(channels) {}

template <typename T>
LayerSpec ResidualBlock<T>::spec() const {
    return {LayerKind::residual_block, channels_, channels_, 3, 1, 1};
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    require_channels(x, channels_, "residual_block");
    const auto h = relu(bn1.forward(conv1.forward(x, ctx), ctx));
    return relu(add(bn2.forward(conv2.forward(h, ctx), ctx), x));
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix, StateList<T>& out) {
    conv1.collect(join(prefix, "conv1"), out);
    bn1.collect(join(prefix, "bn1"), out);
    conv2.collect(join(prefix, "conv2"), out);
    bn2.collect(join(prefix, "bn2"), out);
}

template <typename T>
std::string ResidualBlock<T>::describe() const {
    return spec().describe() + "[" + conv1.describe() + "," + bn1.describe() + ",relu," + conv2.describe() + "," +
           bn2.describe() + ",add,relu]";
}

// Containers ---------------------------------------------------------------

template <typename T>
ConcatBranches<T>::ConcatBranches(std::vector<ModulePtr<T>> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw InvalidArgument("concat_branches needs at least one branch");
}

template <typename T>
Tensor<T> ConcatBranches<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    std::vector<Tensor<T>> outputs;
    outputs.reserve(branches_.size());
    for (auto& b : branches_) outputs.push_back(b->forward(x, ctx));
    return concat(outputs, 1);
}

template <typename T>
void ConcatBranches<T>::collect(const std::string& prefix, StateList<T>& out) {
    for (std::size_t i = 0; i < branches_.size(); ++i) branches_[i]->collect(join(prefix, std::to_string(i)), out);
}

template <typename T>
std::string ConcatBranches<T>::describe() const {
    std::string s = "concat_branches[";
    for (std::size_t i = 0; i < branches_.size(); ++i) s += (i ? "|" : "") + branches_[i]->describe();
    return s + "]";
}

template <typename T>
Sequential<T>& Sequential<T>::add(ModulePtr<T> layer) {
    layers_.push_back(std::move(layer));
    return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, ForwardContext& ctx) {
    Tensor<T> h = x;
    for (auto& layer : layers_) h = layer->forward(h, ctx);
    return h;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, StateList<T>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(join(prefix, std::to_string(i)), out);
}

template <typename T>
std::string Sequential<T>::describe() const {
    std::string s = "[";
    for (std::size_t i = 0; i < layers_.size(); ++i) s += (i ? "," : "") + layers_[i]->describe();
    return s + "]";
}

// Initialization -----------------------------------------------------------

template <typename T>
void initialize(Module<T>& module, const std::string& prefix, std::uint64_t seed) {
    StateList<T> state;
    module.collect(prefix, state);
    for (auto& [name, p] : state.parameters) {
        auto values = p->value.mutable_data();
        switch (p->init) {
            case InitRule::zeros: std::fill(values.begin(), values.end(), T(0)); break;
            case InitRule::ones: std::fill(values.begin(), values.end(), T(1)); break;
            case InitRule::kaiming_normal: {
                std::mt19937_64 rng(derive_seed(seed, name));
                std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(p->fan_in)));
                for (auto& v : values) v = static_cast<T>(dist(rng));
                break;
            }
        }
    }
    for (auto& [name, b] : state.buffers) {
        const bool is_var = name.size() >= 3 && name.compare(name.size() - 3, 3, "var") == 0;
        auto values = b->mutable_data();
        std::fill(values.begin(), values.end(), is_var ? T(1) : T(0));
    }
}

template <typename T>
std::size_t parameter_count(Module<T>& module) {
    StateList<T> state;
    module.collect("", state);
    std::size_t n = 0;
    for (auto& [name, p] : state.parameters) n += p->value.numel();
    return n;
}

#define ODOR_NN_INSTANTIATE(T)                                                  \
    template class Module<T>;                                                   \
    template class Conv1d<T>;                                                   \
    template class BatchNorm1d<T>;                                              \
    template class ReLU<T>;                                                     \
    template class MaxPool1d<T>;                                                \
    template class GlobalAvgPool<T>;                                            \
    template class Linear<T>;                                                   \
    template class Dropout<T>;                                                  \
    template class SEAttention<T>;                                              \
    template class SpatialAttention<T>;                                         \
    template class ResidualBlock<T>;                                            \
    template class ConcatBranches<T>;                                           \
    template class Sequential<T>;                                               \
    template void initialize<T>(Module<T>&, const std::string&, std::uint64_t); \
    template std::size_t parameter_count<T>(Module<T>&);

ODOR_NN_INSTANTIATE(float)
ODOR_NN_INSTANTIATE(double)

}  // namespace odor::nn
