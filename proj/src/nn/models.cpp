#include "odor/nn/models.hpp"

#include <set>

#include "odor/core/errors.hpp"

namespace odor::nn {

std::string_view architecture_name(Architecture arch) {
    return arch == Architecture::attention_cnn ? "attention_cnn" : "res_cnn";
}

Architecture parse_architecture(std::string_view text) {
    if (text == "attention_cnn" || text == "attention") return Architecture::attention_cnn;
    if (text == "res_cnn" || text == "rescnn" || text == "res") return Architecture::res_cnn;
    throw InvalidArgument("unknown architecture '" + std::string(text) + "'");
}

template <typename T>
Model<T>::Model(Architecture arch, std::size_t channels, std::size_t bins, std::size_t feature_dim,
                std::unique_ptr<Sequential<T>> trunk, std::unique_ptr<Sequential<T>> head)
    : arch_(arch),
      channels_(channels),
      bins_(bins),
      feature_dim_(feature_dim),
      trunk_(std::move(trunk)),
      head_(std::move(head)) {}

template <typename T>
typename Model<T>::Output Model<T>::forward(const Tensor<T>& batch, ForwardContext& ctx) {
    if (batch.rank() != 3 || batch.dim(1) != channels_ || batch.dim(2) != bins_)
        throw ShapeError(std::string(architecture_name(arch_)) + " expects (N, " + std::to_string(channels_) + ", " +
                         std::to_string(bins_) + ") input, got " + to_string(batch.shape()));
    Output out;
    out.features = trunk_->forward(batch, ctx);
    out.logits = head_->forward(out.features, ctx);
    return out;
}

template <typename T>
std::string Model<T>::descriptor() const {
    return std::string(architecture_name(arch_)) + "(" + std::to_string(channels_) + "x" + std::to_string(bins_) +
           ")" + trunk_->describe() + "->" + head_->describe();
}

template <typename T>
StateList<T> Model<T>::state() {
    StateList<T> s;
    trunk_->collect("trunk", s);
    head_->collect("head", s);
    return s;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::parameters() {
    std::vector<Tensor<T>> out;
    for (auto& [name, p] : state().parameters) out.push_back(p->value);
    return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() {
    std::size_t n = 0;
    for (auto& [name, p] : state().parameters) n += p->value.numel();
    return n;
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
    nn::initialize<T>(*trunk_, "trunk", seed);
    nn::initialize<T>(*head_, "head", seed);
}

template <typename T>
Model<T> build_attention_cnn(std::uint64_t seed, std::size_t channels, std::size_t bins) {
    auto trunk = std::make_unique<Sequential<T>>();
    trunk->template emplace<MaxPool1d<T>>(2);
    trunk->template emplace<Conv1d<T>>(channels, 64, 3, 1, 1, false);
    trunk->template emplace<BatchNorm1d<T>>(64);
    trunk->template emplace<ReLU<T>>();
    trunk->template emplace<MaxPool1d<T>>(4);
    trunk->template emplace<Conv1d<T>>(64, 128, 3, 1, 1, false);
    trunk->template emplace<BatchNorm1d<T>>(128);
    trunk->template emplace<ReLU<T>>();
    trunk->template emplace<MaxPool1d<T>>(4);
    std::vector<ModulePtr<T>> branches;
    for (std::size_t k : {1, 3, 5}) branches.push_back(std::make_unique<Conv1d<T>>(128, 64, k, 1, k / 2, true));
    trunk->template emplace<ConcatBranches<T>>(std::move(branches));
    trunk->template emplace<SEAttention<T>>(192, 8);
    trunk->template emplace<SpatialAttention<T>>(7);
    trunk->template emplace<GlobalAvgPool<T>>();

    auto head = std::make_unique<Sequential<T>>();
    head->template emplace<Dropout<T>>(0.3);
    head->template emplace<Linear<T>>(192, 256);
    head->template emplace<ReLU<T>>();
    head->template emplace<Dropout<T>>(0.5);
    head->template emplace<Linear<T>>(256, 2);

    Model<T> model(Architecture::attention_cnn, channels, bins, 192, std::move(trunk), std::move(head));
    model.initialize(seed);
    return model;
}

template <typename T>
Model<T> build_res_cnn(std::uint64_t seed, std::size_t channels, std::size_t bins) {
    auto trunk = std::make_unique<Sequential<T>>();
    trunk->template emplace<MaxPool1d<T>>(2);
    trunk->template emplace<Conv1d<T>>(channels, 64, 7, 2, 3, false);
    trunk->template emplace<BatchNorm1d<T>>(64);
    trunk->template emplace<ReLU<T>>();
    trunk->template emplace<MaxPool1d<T>>(4);
    for (int i = 0; i < 3; ++i) trunk->template emplace<ResidualBlock<T>>(64);
    trunk->template emplace<Conv1d<T>>(64, 128, 3, 1, 1, false);
    trunk->template emplace<BatchNorm1d<T>>(128);
    trunk->template emplace<ReLU<T>>();
    trunk->template emplace<MaxPool1d<T>>(2);
    for (int i = 0; i < 2; ++i) trunk->template emplace<ResidualBlock<T>>(128);
    trunk->template emplace<GlobalAvgPool<T>>();

    auto head = std::make_unique<Sequential<T>>();
    head->template emplace<Dropout<T>>(0.4);
    head->template emplace<Linear<T>>(128, 2);

    Model<T> model(Architecture::res_cnn, channels, bins, 128, std::move(trunk), std::move(head));
    model.initialize(seed);
    return model;
}

template <typename T>
Model<T> build_model(Architecture arch, std::uint64_t seed, std::size_t channels, std::size_t bins) {
    return arch == Architecture::attention_cnn ? build_attention_cnn<T>(seed, channels, bins)
                                               : build_res_cnn<T>(seed, channels, bins);
}

template <typename T>
Checkpoint to_checkpoint(Model<T>& model, Precision precision) {
    Checkpoint ck;
    ck.descriptor = model.descriptor();
    ck.precision = precision;
    auto s = model.state();
    for (auto& [name, p] : s.parameters) ck.entries.push_back(make_entry(name, p->value));
    for (auto& [name, b] : s.buffers) ck.entries.push_back(make_entry(name, *b));
    return ck;
}

template <typename T>
void load_state(Model<T>& model, const Checkpoint& checkpoint) {
    if (checkpoint.descriptor != model.descriptor())
        throw InvalidArgument("checkpoint architecture does not match the model:\n  checkpoint: " +
                              checkpoint.descriptor + "\n  model:      " + model.descriptor());
    auto s = model.state();
    std::vector<std::pair<std::string, Tensor<T>*>> targets;
    for (auto& [name, p] : s.parameters) targets.emplace_back(name, &p->value);
    for (auto& [name, b] : s.buffers) targets.emplace_back(name, b);
    std::set<std::string> expected;
    for (auto& [name, t] : targets) {
        expected.insert(name);
        const auto* entry = checkpoint.find(name);
        if (!entry) throw InvalidArgument("checkpoint lacks " + name);
        if (entry->shape != t->shape())
            throw InvalidArgument("checkpoint entry " + name + " has shape " + to_string(entry->shape) +
                                  ", model expects " + to_string(t->shape()));
    }
    // Validate everything before mutating so a failed load leaves the model untouched.
    for (const auto& e : checkpoint.entries)
        if (!expected.count(e.name) && (e.name.rfind("trunk.", 0) == 0 || e.name.rfind("head.", 0) == 0))
            throw InvalidArgument("checkpoint has unexpected entry " + e.name);
    for (auto& [name, t] : targets) {
        const auto* entry = checkpoint.find(name);
        auto values = t->mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<T>(entry->values[i]);
    }
}

template <typename T>
Model<T> build_from_checkpoint(const Checkpoint& checkpoint) {
    const auto& d = checkpoint.descriptor;
    const auto open = d.find('('), cross = d.find('x', open), close = d.find(')', open);
    if (open == std::string::npos || cross == std::string::npos || close == std::string::npos || cross > close)
        throw InvalidArgument("checkpoint descriptor not recognized: " + d.substr(0, 64));
    std::size_t channels = 0, bins = 0;
    try {
        channels = std::stoul(d.substr(open + 1, cross - open - 1));
        bins = std::stoul(d.substr(cross + 1, close - cross - 1));
    } catch (const std::exception&) {
        throw InvalidArgument("checkpoint descriptor not recognized: " + d.substr(0, 64));
    }
    auto model = build_model<T>(parse_architecture(d.substr(0, open)), 0, channels, bins);
    load_state(model, checkpoint);
    return model;
}

#define ODOR_MODEL_INSTANTIATE(T)                                                         \
    template class Model<T>;                                                              \
    template Model<T> build_attention_cnn<T>(std::uint64_t, std::size_t, std::size_t);    \
    template Model<T> build_res_cnn<T>(std::uint64_t, std::size_t, std::size_t);          \
    template Model<T> build_model<T>(Architecture, std::uint64_t, std::size_t, std::size_t); \
    template Checkpoint to_checkpoint<T>(Model<T>&, Precision);                           \
    template void load_state<T>(Model<T>&, const Checkpoint&);                            \
    template Model<T> build_from_checkpoint<T>(const Checkpoint&);

ODOR_MODEL_INSTANTIATE(float)
ODOR_MODEL_INSTANTIATE(double)

}  // namespace odor::nn
