#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "odor/core/errors.hpp"

namespace odor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a backward pass or zero_grad touches it
    bool requires_grad = false;
    bool is_leaf = true;
    const Tape<T>* tape = nullptr;
    std::size_t tape_index = 0;

    std::vector<T>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

}  // namespace detail

/// Dense row-major array. Copies share storage; use clone() for a deep copy.
/// Data is immutable once an op has produced it; only leaves may be written
/// through mutable_data() (parameters, gradient-check probes).
template <typename T>
class Tensor {
public:
    using Node = detail::TensorNode<T>;

    Tensor();

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
    static Tensor scalar(T value);

    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    std::span<T> mutable_data();
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return node_->is_leaf; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad();

    Tensor clone(bool requires_grad = false) const;

    // Internal: op kernels build results from here.
    static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

/// Append-only record of differentiable ops. Constructing a Tape makes it the
/// active tape for its scalar type on the current thread until destruction;
/// ops with a requires_grad input are recorded onto it.
template <typename T>
class Tape {
public:
    using Node = detail::TensorNode<T>;
    using BackwardFn = std::function<void(const std::vector<T>& out_grad)>;

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    /// Populates grads of every requires_grad tensor reachable from `loss`.
    void backward(const Tensor<T>& loss);
    void reset();

    std::size_t size() const { return entries_.size(); }
    bool consumed() const { return consumed_; }

    // Internal: used by op kernels.
    void record(const std::shared_ptr<Node>& out, std::vector<std::shared_ptr<Node>> inputs,
                BackwardFn backward);

private:
    struct Entry {
        std::shared_ptr<Node> out;
        std::vector<std::shared_ptr<Node>> inputs;
        BackwardFn backward;
    };
    std::vector<Entry> entries_;
    bool consumed_ = false;
    Tape* previous_ = nullptr;
};

/// Suspends recording on the current thread for its lifetime.
template <typename T>
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Tape<T>* saved_;
};

/// Hash of every branch taken by piecewise-linear ops (ReLU sign, max and
/// maxpool argmax) on this thread while alive. Two evaluations with equal
/// fingerprints lie on the same smooth piece of the function.
class BranchFingerprint {
public:
    BranchFingerprint();
    ~BranchFingerprint();
    BranchFingerprint(const BranchFingerprint&) = delete;
    BranchFingerprint& operator=(const BranchFingerprint&) = delete;

    std::uint64_t value() const { return hash_; }

    // Internal: called by op kernels.
    static BranchFingerprint* active();
    void mix(std::uint64_t v) { hash_ = (hash_ ^ v) * 0x100000001b3ULL; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
    BranchFingerprint* previous_;
};

// ---------------------------------------------------------------------------
// Primitive ops. Elementwise binaries broadcast numpy-style (right aligned,
// size-1 axes expand). Every result is checked for non-finite values.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);

/// Softmax over the last axis of a rank-2 tensor, max-subtracted.
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& x);
template <typename T> Tensor<T> log_softmax_rows(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdim);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdim);
/// Max along one axis; backward routes to the first maximal index.
template <typename T> Tensor<T> max(const Tensor<T>& x, std::size_t axis, bool keepdim);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x, std::size_t axis_a, std::size_t axis_b);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

/// x: (N, C_in, L), weight: (C_out, C_in, K), bias: (C_out). Cross-correlation, zero padding.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);
/// x: (N, C, L); no padding; ties resolve to the first index.
template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, std::size_t kernel, std::size_t stride);

/// Mean cross-entropy of logits (N, C) against integer class labels.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);
std::size_t pool_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

}  // namespace odor
