#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "odor/core/tensor.hpp"

namespace odor {

namespace {

template <typename T>
using Node = detail::TensorNode<T>;
template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

using Strides = std::vector<std::size_t>;

Strides contiguous_strides(const Shape& shape) {
    Strides s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

// Strides of `in` viewed with the rank of `out`; broadcast axes get stride 0.
Strides broadcast_strides(const Shape& in, const Shape& out) {
    Strides result(out.size(), 0);
    const Strides own = contiguous_strides(in);
    const std::size_t lead = out.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i)
        result[lead + i] = in[i] == 1 ? 0 : own[i];
    return result;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Visits every element of `shape` in row-major order, passing the matching
// offsets for each stride set.
template <std::size_t K, typename F>
void walk(const Shape& shape, const std::array<const Strides*, K>& strides, F&& fn) {
    const std::size_t total = numel(shape);
    if (total == 0) return;
    const std::size_t rank = shape.size();
    if (rank == 0) {
        std::array<std::size_t, K> off{};
        fn(std::size_t{0}, off);
        return;
    }
    std::vector<std::size_t> index(rank, 0);
    std::array<std::size_t, K> off{};
    const std::size_t inner = shape[rank - 1];
    std::array<std::size_t, K> inner_stride{};
    for (std::size_t k = 0; k < K; ++k) inner_stride[k] = (*strides[k])[rank - 1];

    std::size_t linear = 0;
    while (linear < total) {
        std::array<std::size_t, K> cur = off;
        for (std::size_t j = 0; j < inner; ++j) {
            fn(linear++, cur);
            for (std::size_t k = 0; k < K; ++k) cur[k] += inner_stride[k];
        }
        // advance outer index
        std::size_t axis = rank - 1;
        while (axis-- > 0) {
            ++index[axis];
            for (std::size_t k = 0; k < K; ++k) off[k] += (*strides[k])[axis];
            if (index[axis] < shape[axis]) break;
            for (std::size_t k = 0; k < K; ++k) off[k] -= (*strides[k])[axis] * shape[axis];
            index[axis] = 0;
        }
    }
}

template <typename T>
bool any_requires_grad(const std::vector<NodePtr<T>>& inputs) {
    return std::any_of(inputs.begin(), inputs.end(), [](const auto& n) { return n->requires_grad; });
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data, std::vector<NodePtr<T>> inputs,
                      typename Tape<T>::BackwardFn backward) {
    for (T v : data)
        if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value produced by ") + op);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    auto* tape = Tape<T>::active();
    if (tape && any_requires_grad(inputs)) tape->record(node, std::move(inputs), std::move(backward));
    return Tensor<T>::wrap(std::move(node));
}

// Accumulate `values` (shaped like `from`) into the grad of `target`, summing
// over axes that were broadcast.
template <typename T>
void accumulate_reduced(Node<T>& target, const std::vector<T>& values, const Shape& from) {
    if (!target.requires_grad) return;
    auto& g = target.grad_buffer();
    if (target.shape == from) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += values[i];
        return;
    }
    const Strides own = contiguous_strides(from);
    const Strides to = broadcast_strides(target.shape, from);
    walk<2>(from, {&own, &to}, [&](std::size_t, const std::array<std::size_t, 2>& o) { g[o[1]] += values[o[0]]; });
}

enum class BinaryOp { add, sub, mul, div };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op, const char* name) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const Strides sa = broadcast_strides(a.shape(), out_shape);
    const Strides sb = broadcast_strides(b.shape(), out_shape);
    std::vector<T> out(numel(out_shape));
    const auto da = a.data();
    const auto db = b.data();
    walk<2>(out_shape, {&sa, &sb}, [&](std::size_t i, const std::array<std::size_t, 2>& o) {
        const T x = da[o[0]];
        const T y = db[o[1]];
        switch (op) {
            case BinaryOp::add: out[i] = x + y; break;
            case BinaryOp::sub: out[i] = x - y; break;
            case BinaryOp::mul: out[i] = x * y; break;
            case BinaryOp::div: out[i] = x / y; break;
        }
    });
    auto na = a.node();
    auto nb = b.node();
    return make_result<T>(name, out_shape, std::move(out), {na, nb},
        [na, nb, op, out_shape, sa, sb](const std::vector<T>& g) {
            const std::size_t n = g.size();
            if (na->requires_grad) {
                std::vector<T> ga(n);
                if (op == BinaryOp::add || op == BinaryOp::sub) {
                    ga = g;
                } else {
                    walk<1>(out_shape, {&sb}, [&](std::size_t i, const std::array<std::size_t, 1>& o) {
                        const T y = nb->data[o[0]];
                        ga[i] = op == BinaryOp::mul ? g[i] * y : g[i] / y;
                    });
                }
                accumulate_reduced(*na, ga, out_shape);
            }
            if (nb->requires_grad) {
                std::vector<T> gb(n);
                walk<2>(out_shape, {&sa, &sb}, [&](std::size_t i, const std::array<std::size_t, 2>& o) {
                    const T x = na->data[o[0]];
                    const T y = nb->data[o[1]];
                    switch (op) {
                        case BinaryOp::add: gb[i] = g[i]; break;
                        case BinaryOp::sub: gb[i] = -g[i]; break;
                        case BinaryOp::mul: gb[i] = g[i] * x; break;
                        case BinaryOp::div: gb[i] = -g[i] * x / (y * y); break;
                    }
                });
                accumulate_reduced(*nb, gb, out_shape);
            }
        });
}

void check_axis(std::size_t axis, const Shape& shape, const char* op) {
    if (axis >= shape.size())
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         to_string(shape));
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
    if (stride == 0) throw InvalidArgument("conv1d: stride must be >= 1");
    if (length + 2 * padding < kernel)
        throw ShapeError("conv1d: padded length " + std::to_string(length + 2 * padding) +
                         " shorter than kernel " + std::to_string(kernel));
    return (length + 2 * padding - kernel) / stride + 1;
}

std::size_t pool_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
    if (stride == 0 || kernel == 0) throw InvalidArgument("maxpool1d: kernel and stride must be >= 1");
    if (kernel > length)
        throw ShapeError("maxpool1d: kernel " + std::to_string(kernel) + " exceeds length " +
                         std::to_string(length));
    return (length - kernel) / stride + 1;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryOp::add, "add"); }
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryOp::sub, "sub"); }
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryOp::mul, "mul"); }
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryOp::div, "div"); }

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] * factor;
    auto nx = x.node();
    return make_result<T>("scale", x.shape(), std::move(out), {nx}, [nx, factor](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] + value;
    auto nx = x.node();
    return make_result<T>("add_scalar", x.shape(), std::move(out), {nx}, [nx](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    std::vector<T> out(static_cast<std::size_t>(m * n));
    MapMatrix<T>(out.data(), m, n).noalias() =
        ConstMapMatrix<T>(a.data().data(), m, k) * ConstMapMatrix<T>(b.data().data(), k, n);
    auto na = a.node();
    auto nb = b.node();
    return make_result<T>("matmul", {a.dim(0), b.dim(1)}, std::move(out), {na, nb},
        [na, nb, m, k, n](const std::vector<T>& g) {
            ConstMapMatrix<T> G(g.data(), m, n);
            if (na->requires_grad) {
                auto& ga = na->grad_buffer();
                MapMatrix<T>(ga.data(), m, k).noalias() += G * ConstMapMatrix<T>(nb->data.data(), k, n).transpose();
            }
            if (nb->requires_grad) {
                auto& gb = nb->grad_buffer();
                MapMatrix<T>(gb.data(), k, n).noalias() += ConstMapMatrix<T>(na->data.data(), m, k).transpose() * G;
            }
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] > T(0) ? src[i] : T(0);
    if (auto* fp = BranchFingerprint::active())
        for (std::size_t i = 0; i < src.size(); ++i) fp->mix(src[i] > T(0) ? 2 * i + 1 : 2 * i);
    auto nx = x.node();
    return make_result<T>("relu", x.shape(), std::move(out), {nx}, [nx](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (nx->data[i] > T(0)) gx[i] += g[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    const auto src = x.data();
    auto values = std::make_shared<std::vector<T>>(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const T v = src[i];
        // split by sign so exp() never overflows
        if (v >= T(0)) {
            (*values)[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            (*values)[i] = e / (T(1) + e);
        }
    }
    auto nx = x.node();
    return make_result<T>("sigmoid", x.shape(), *values, {nx}, [nx, values](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = (*values)[i];
            gx[i] += g[i] * s * (T(1) - s);
        }
    });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = std::log(src[i]);
    auto nx = x.node();
    return make_result<T>("log", x.shape(), std::move(out), {nx}, [nx](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / nx->data[i];
    });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
    const auto src = x.data();
    auto values = std::make_shared<std::vector<T>>(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) (*values)[i] = std::sqrt(src[i]);
    auto nx = x.node();
    return make_result<T>("sqrt", x.shape(), *values, {nx}, [nx, values](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / (T(2) * (*values)[i]);
    });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    if (x.rank() != 2) throw ShapeError("softmax_rows expects rank 2, got " + to_string(x.shape()));
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    const auto src = x.data();
    auto values = std::make_shared<std::vector<T>>(src.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = src.data() + r * cols;
        T* out = values->data() + r * cols;
        const T top = *std::max_element(in, in + cols);
        T total = 0;
        for (std::size_t c = 0; c < cols; ++c) total += out[c] = std::exp(in[c] - top);
        for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
    }
    auto nx = x.node();
    return make_result<T>("softmax_rows", x.shape(), *values, {nx},
        [nx, values, rows, cols](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const T* s = values->data() + r * cols;
                const T* gr = g.data() + r * cols;
                T dot = 0;
                for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * s[c];
                for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += s[c] * (gr[c] - dot);
            }
        });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
    if (x.rank() != 2) throw ShapeError("log_softmax_rows expects rank 2, got " + to_string(x.shape()));
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    const auto src = x.data();
    auto values = std::make_shared<std::vector<T>>(src.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = src.data() + r * cols;
        T* out = values->data() + r * cols;
        const T top = *std::max_element(in, in + cols);
        T total = 0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(in[c] - top);
        const T lse = top + std::log(total);
        for (std::size_t c = 0; c < cols; ++c) out[c] = in[c] - lse;
    }
    auto nx = x.node();
    return make_result<T>("log_softmax_rows", x.shape(), *values, {nx},
        [nx, values, rows, cols](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const T* lp = values->data() + r * cols;
                const T* gr = g.data() + r * cols;
                T total = 0;
                for (std::size_t c = 0; c < cols; ++c) total += gr[c];
                for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += gr[c] - std::exp(lp[c]) * total;
            }
        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T total = 0;
    for (T v : x.data()) total += v;
    auto nx = x.node();
    return make_result<T>("sum", {}, {total}, {nx}, [nx](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (auto& v : gx) v += g[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdim) {
    Shape kept = x.shape();
    for (auto axis : axes) {
        check_axis(axis, kept, "sum");
        kept[axis] = 1;
    }
    const Strides own = contiguous_strides(x.shape());
    const Strides to = broadcast_strides(kept, x.shape());
    std::vector<T> out(numel(kept), T(0));
    const auto src = x.data();
    walk<2>(x.shape(), {&own, &to}, [&](std::size_t, const std::array<std::size_t, 2>& o) { out[o[1]] += src[o[0]]; });

    Shape result_shape;
    if (keepdim) {
        result_shape = kept;
    } else {
        for (std::size_t i = 0; i < kept.size(); ++i)
            if (std::find(axes.begin(), axes.end(), i) == axes.end()) result_shape.push_back(kept[i]);
    }
    auto nx = x.node();
    const Shape in_shape = x.shape();
    return make_result<T>("sum_axes", result_shape, std::move(out), {nx},
        [nx, in_shape, own, to](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            walk<2>(in_shape, {&own, &to}, [&](std::size_t, const std::array<std::size_t, 2>& o) { gx[o[0]] += g[o[1]]; });
        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdim) {
    std::size_t count = 1;
    for (auto axis : axes) {
        check_axis(axis, x.shape(), "mean");
        count *= x.dim(axis);
    }
    return scale(sum(x, axes, keepdim), T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> max(const Tensor<T>& x, std::size_t axis, bool keepdim) {
    check_axis(axis, x.shape(), "max");
    const Shape& shape = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t extent = shape[axis];
    const auto src = x.data();
    std::vector<T> out(outer * inner);
    auto argmax = std::make_shared<std::vector<std::size_t>>(outer * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t best = o * extent * inner + i;
            for (std::size_t e = 1; e < extent; ++e) {
                const std::size_t idx = (o * extent + e) * inner + i;
                if (src[idx] > src[best]) best = idx;
            }
            out[o * inner + i] = src[best];
            (*argmax)[o * inner + i] = best;
        }
    }
    if (auto* fp = BranchFingerprint::active())
        for (auto idx : *argmax) fp->mix(idx);
    Shape result_shape = shape;
    if (keepdim) result_shape[axis] = 1;
    else result_shape.erase(result_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    auto nx = x.node();
    return make_result<T>("max", result_shape, std::move(out), {nx}, [nx, argmax](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
    });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    check_axis(axis, first, "concat");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i)
            if (i != axis && s[i] != first[i]) ok = false;
        if (!ok) throw ShapeError("concat: shape " + to_string(s) + " incompatible with " + to_string(first));
        out_shape[axis] += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    const std::size_t out_row = out_shape[axis] * inner;

    std::vector<T> out(numel(out_shape));
    std::vector<NodePtr<T>> inputs;
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t row = p.dim(axis) * inner;
        const auto src = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(src.data() + o * row, row, out.data() + o * out_row + offset);
        inputs.push_back(p.node());
        offsets.push_back(offset);
        offset += row;
    }
    return make_result<T>("concat", out_shape, std::move(out), inputs,
        [inputs, offsets, outer, inner, out_row, axis](const std::vector<T>& g) {
            for (std::size_t p = 0; p < inputs.size(); ++p) {
                auto& node = *inputs[p];
                if (!node.requires_grad) continue;
                const std::size_t row = node.shape[axis] * inner;
                auto& gx = node.grad_buffer();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t j = 0; j < row; ++j) gx[o * row + j] += g[o * out_row + offsets[p] + j];
            }
        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    auto nx = x.node();
    std::vector<T> out(x.data().begin(), x.data().end());
    return make_result<T>("reshape", std::move(shape), std::move(out), {nx}, [nx](const std::vector<T>& g) {
        auto& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::size_t axis_a, std::size_t axis_b) {
    check_axis(axis_a, x.shape(), "transpose");
    check_axis(axis_b, x.shape(), "transpose");
    Shape out_shape = x.shape();
    std::swap(out_shape[axis_a], out_shape[axis_b]);
    // Strides of the source, permuted into output order.
    Strides src_strides = contiguous_strides(x.shape());
    std::swap(src_strides[axis_a], src_strides[axis_b]);
    std::vector<T> out(x.numel());
    const auto src = x.data();
    walk<1>(out_shape, {&src_strides}, [&](std::size_t i, const std::array<std::size_t, 1>& o) { out[i] = src[o[0]]; });
    auto nx = x.node();
    return make_result<T>("transpose", out_shape, std::move(out), {nx},
        [nx, out_shape, src_strides](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            walk<1>(out_shape, {&src_strides}, [&](std::size_t i, const std::array<std::size_t, 1>& o) { gx[o[0]] += g[i]; });
        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
    check_axis(axis, x.shape(), "slice");
    if (begin >= end || end > x.dim(axis))
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for axis of size " + std::to_string(x.dim(axis)));
    const Shape& shape = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t in_row = shape[axis] * inner;
    const std::size_t out_row = (end - begin) * inner;
    Shape out_shape = shape;
    out_shape[axis] = end - begin;
    std::vector<T> out(outer * out_row);
    const auto src = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(src.data() + o * in_row + begin * inner, out_row, out.data() + o * out_row);
    auto nx = x.node();
    return make_result<T>("slice", out_shape, std::move(out), {nx},
        [nx, outer, in_row, out_row, begin, inner](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < out_row; ++j) gx[o * in_row + begin * inner + j] += g[o * out_row + j];
        });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
    if (shape.size() < x.rank()) throw ShapeError("broadcast_to: target rank smaller than source");
    const std::size_t lead = shape.size() - x.rank();
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (x.dim(i) != shape[lead + i] && x.dim(i) != 1)
            throw ShapeError("broadcast_to: cannot expand " + to_string(x.shape()) + " to " + to_string(shape));
    const Strides strides = broadcast_strides(x.shape(), shape);
    std::vector<T> out(numel(shape));
    const auto src = x.data();
    walk<1>(shape, {&strides}, [&](std::size_t i, const std::array<std::size_t, 1>& o) { out[i] = src[o[0]]; });
    auto nx = x.node();
    return make_result<T>("broadcast_to", shape, std::move(out), {nx}, [nx, shape](const std::vector<T>& g) {
        accumulate_reduced(*nx, g, shape);
    });
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding) {
    if (x.rank() != 3 || weight.rank() != 3 || bias.rank() != 1)
        throw ShapeError("conv1d: expected x (N,C,L), weight (O,C,K), bias (O); got " + to_string(x.shape()) +
                         ", " + to_string(weight.shape()) + ", " + to_string(bias.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), len = x.dim(2);
    const std::size_t o = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c)
        throw ShapeError("conv1d: input has " + std::to_string(c) + " channels, weight expects " +
                         std::to_string(weight.dim(1)));
    if (bias.dim(0) != o) throw ShapeError("conv1d: bias length does not match output channels");
    const std::size_t lout = conv1d_output_length(len, k, stride, padding);
    const std::size_t ck = c * k, cols_n = n * lout;

    // im2col: (C*K) x (N*Lout)
    auto cols = std::make_shared<std::vector<T>>(ck * cols_n, T(0));
    const auto src = x.data();
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            T* row = cols->data() + (ci * k + ki) * cols_n;
            for (std::size_t ni = 0; ni < n; ++ni) {
                const T* in = src.data() + (ni * c + ci) * len;
                for (std::size_t l = 0; l < lout; ++l) {
                    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + ki) -
                                               static_cast<std::ptrdiff_t>(padding);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) row[ni * lout + l] = in[pos];
                }
            }
        }
    }
    RowMatrix<T> y = ConstMapMatrix<T>(weight.data().data(), static_cast<Eigen::Index>(o),
                                       static_cast<Eigen::Index>(ck)) *
                     ConstMapMatrix<T>(cols->data(), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(cols_n));
    std::vector<T> out(n * o * lout);
    const auto b = bias.data();
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t oi = 0; oi < o; ++oi)
            for (std::size_t l = 0; l < lout; ++l)
                out[(ni * o + oi) * lout + l] = y(static_cast<Eigen::Index>(oi), static_cast<Eigen::Index>(ni * lout + l)) + b[oi];

    auto nx = x.node(), nw = weight.node(), nb = bias.node();
    return make_result<T>("conv1d", {n, o, lout}, std::move(out), {nx, nw, nb},
        [nx, nw, nb, cols, n, c, len, o, k, lout, stride, padding](const std::vector<T>& g) {
            const std::size_t ck = c * k, cols_n = n * lout;
            RowMatrix<T> gm(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(cols_n));
            for (std::size_t ni = 0; ni < n; ++ni)
                for (std::size_t oi = 0; oi < o; ++oi)
                    for (std::size_t l = 0; l < lout; ++l)
                        gm(static_cast<Eigen::Index>(oi), static_cast<Eigen::Index>(ni * lout + l)) = g[(ni * o + oi) * lout + l];
            if (nb->requires_grad) {
                auto& gb = nb->grad_buffer();
                for (std::size_t oi = 0; oi < o; ++oi) gb[oi] += gm.row(static_cast<Eigen::Index>(oi)).sum();
            }
            if (nw->requires_grad) {
                auto& gw = nw->grad_buffer();
                MapMatrix<T>(gw.data(), static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(ck)).noalias() +=
                    gm * ConstMapMatrix<T>(cols->data(), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(cols_n)).transpose();
            }
            if (nx->requires_grad) {
                RowMatrix<T> gcols = ConstMapMatrix<T>(nw->data.data(), static_cast<Eigen::Index>(o),
                                                       static_cast<Eigen::Index>(ck)).transpose() * gm;
                auto& gx = nx->grad_buffer();
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        const T* row = gcols.data() + (ci * k + ki) * cols_n;
                        for (std::size_t ni = 0; ni < n; ++ni) {
                            T* dst = gx.data() + (ni * c + ci) * len;
                            for (std::size_t l = 0; l < lout; ++l) {
                                const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + ki) -
                                                           static_cast<std::ptrdiff_t>(padding);
                                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += row[ni * lout + l];
                            }
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, std::size_t kernel, std::size_t stride) {
    if (x.rank() != 3) throw ShapeError("maxpool1d: expected (N,C,L), got " + to_string(x.shape()));
    const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
    const std::size_t lout = pool_output_length(len, kernel, stride);
    const auto src = x.data();
    std::vector<T> out(rows * lout);
    auto argmax = std::make_shared<std::vector<std::size_t>>(rows * lout);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t l = 0; l < lout; ++l) {
            std::size_t best = r * len + l * stride;
            for (std::size_t j = 1; j < kernel; ++j) {
                const std::size_t idx = r * len + l * stride + j;
                if (src[idx] > src[best]) best = idx;
            }
            out[r * lout + l] = src[best];
            (*argmax)[r * lout + l] = best;
        }
    }
    if (auto* fp = BranchFingerprint::active())
        for (auto idx : *argmax) fp->mix(idx);
    auto nx = x.node();
    return make_result<T>("maxpool1d", {x.dim(0), x.dim(1), lout}, std::move(out), {nx},
        [nx, argmax](const std::vector<T>& g) {
            auto& gx = nx->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size())
        throw ShapeError("cross_entropy: logits " + to_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t rows = logits.dim(0), classes = logits.dim(1);
    std::vector<T> onehot(rows * classes, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
            throw InvalidArgument("cross_entropy: label out of range");
        onehot[r * classes + static_cast<std::size_t>(labels[r])] = T(1);
    }
    const auto target = Tensor<T>::from({rows, classes}, std::move(onehot));
    return scale(sum(mul(log_softmax_rows(logits), target)), T(-1) / static_cast<T>(rows));
}

#define ODOR_INSTANTIATE_OPS(T)                                                                          \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                          \
    template Tensor<T> scale(const Tensor<T>&, T);                                                       \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                                  \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> relu(const Tensor<T>&);                                                           \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
    template Tensor<T> log(const Tensor<T>&);                                                            \
    template Tensor<T> sqrt(const Tensor<T>&);                                                           \
    template Tensor<T> softmax_rows(const Tensor<T>&);                                                   \
    template Tensor<T> log_softmax_rows(const Tensor<T>&);                                               \
    template Tensor<T> sum(const Tensor<T>&);                                                            \
    template Tensor<T> mean(const Tensor<T>&);                                                           \
    template Tensor<T> sum(const Tensor<T>&, const std::vector<std::size_t>&, bool);                     \
    template Tensor<T> mean(const Tensor<T>&, const std::vector<std::size_t>&, bool);                    \
    template Tensor<T> max(const Tensor<T>&, std::size_t, bool);                                         \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                               \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
    template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                            \
    template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                   \
    template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                     \
    template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
    template Tensor<T> maxpool1d(const Tensor<T>&, std::size_t, std::size_t);                            \
    template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);

ODOR_INSTANTIATE_OPS(float)
ODOR_INSTANTIATE_OPS(double)

}  // namespace odor
