#include "odor/core/tensor.hpp"

#include <cmath>
#include <sstream>

namespace odor {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    for (auto d : shape)
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
}

template <typename T>
void require_finite(std::span<const T> values, const char* what) {
    for (T v : values)
        if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value in ") + what);
}

template <typename T>
Tape<T>*& active_tape() {
    thread_local Tape<T>* tape = nullptr;
    return tape;
}

}  // namespace

template <typename T>
Tensor<T>::Tensor() : node_(std::make_shared<Node>()) {
    node_->data.assign(1, T(0));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    validate_shape(shape);
    std::vector<T> values(odor::numel(shape), value);
    return from(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    validate_shape(shape);
    if (values.size() != odor::numel(shape))
        throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                         to_string(shape));
    require_finite<T>(values, "tensor data");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
    return from({}, {value});
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
    if (axis >= rank())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
    return node_->shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
    if (!node_->is_leaf) throw TapeError("only leaf tensors may be written in place");
    return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() requires a single element, shape " + to_string(shape()));
    return node_->data[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
    node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
    return from(node_->shape, node_->data, requires_grad);
}

template <typename T>
Tape<T>::Tape() : previous_(active_tape<T>()) {
    active_tape<T>() = this;
}

template <typename T>
Tape<T>::~Tape() {
    if (active_tape<T>() == this) active_tape<T>() = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
    return active_tape<T>();
}

template <typename T>
void Tape<T>::record(const std::shared_ptr<Node>& out, std::vector<std::shared_ptr<Node>> inputs,
                     BackwardFn backward) {
    if (consumed_) throw TapeError("tape already consumed by backward; reset() before recording");
    out->requires_grad = true;
    out->is_leaf = false;
    out->tape = this;
    out->tape_index = entries_.size();
    entries_.push_back(Entry{out, std::move(inputs), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw TapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
    if (consumed_) throw TapeError("backward already ran on this tape; reset() first");
    const auto& root = loss.node();
    if (root->tape != this || root->tape_index >= entries_.size() ||
        entries_[root->tape_index].out != root)
        throw TapeError("loss is not connected to this tape");
    consumed_ = true;

    root->grad.assign(1, T(1));
    for (std::size_t i = root->tape_index + 1; i-- > 0;) {
        auto& entry = entries_[i];
        if (entry.out->grad.empty()) continue;  // not reachable from loss
        entry.backward(entry.out->grad);
    }
}

template <typename T>
void Tape<T>::reset() {
    entries_.clear();
    consumed_ = false;
}

template <typename T>
NoGradGuard<T>::NoGradGuard() : saved_(active_tape<T>()) {
    active_tape<T>() = nullptr;
}

template <typename T>
NoGradGuard<T>::~NoGradGuard() {
    active_tape<T>() = saved_;
}

namespace {

BranchFingerprint*& active_fingerprint() {
    thread_local BranchFingerprint* fp = nullptr;
    return fp;
}

}  // namespace

BranchFingerprint::BranchFingerprint() : previous_(active_fingerprint()) {
    active_fingerprint() = this;
}

BranchFingerprint::~BranchFingerprint() {
    active_fingerprint() = previous_;
}

BranchFingerprint* BranchFingerprint::active() {
    return active_fingerprint();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class NoGradGuard<float>;
template class NoGradGuard<double>;

}  // namespace odor
