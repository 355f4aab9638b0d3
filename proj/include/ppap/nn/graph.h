#pragma once

#include "ppap/nn/tensor.h"

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>

namespace ppap::nn {

// Tape for reverse-mode differentiation. Every op appends one node holding its
// forward value and, when gradients are being recorded, a closure that
// scatters the node's output gradient into its inputs. Nodes live in a deque,
// so references to them stay valid while the tape grows.
//
// A graph built with record = false evaluates the same ops without keeping
// closures; that is the eval-mode inference path.
template <typename T>
class Graph;

// Handle to a node of a Graph<T>.
template <typename T>
class Var {
public:
    Var() = default;
    Var(Graph<T> * graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph<T> & graph() const { return *graph_; }
    std::size_t id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }
    const Tensor<T> & value() const;
    const Shape & shape() const { return value().shape(); }
    std::size_t dim(std::size_t axis) const { return value().dim(axis); }

private:
    Graph<T> * graph_ = nullptr;
    std::size_t id_ = 0;
};

template <typename T>
class Graph {
public:
    using Var = ppap::nn::Var<T>;
    using BackwardFn = std::function<void(const Tensor<T> & out_grad)>;

    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph &) = delete;
    Graph & operator=(const Graph &) = delete;

    bool recording() const { return record_; }
    std::size_t node_count() const { return nodes_.size(); }

    Var constant(Tensor<T> value);

    // Leaf bound to a trainable tensor. On backward() the node's gradient is
    // added into *grad_sink (if non-null).
    Var parameter(const Tensor<T> & value, Tensor<T> * grad_sink);

    // Appends an op result. `backward` is kept only if recording and some
    // input needs a gradient.
    Var emit(Tensor<T> value, std::span<const Var> inputs, BackwardFn backward);
    Var emit(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return emit(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
    }

    const Tensor<T> & value(const Var & v) const { return nodes_[v.id()].value; }
    bool needs_grad(const Var & v) const { return nodes_[v.id()].needs_grad; }

    // Gradient buffer of `v`, zero-initialised on first access.
    Tensor<T> & grad(const Var & v);

    // Seeds d(loss)/d(loss) = 1 and runs closures in reverse order. Throws
    // UsageError if `loss` is not a single element or if nothing was recorded.
    void backward(const Var & loss);

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        BackwardFn backward;
    };

    bool record_;
    std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T> & Var<T>::value() const {
    return graph_->value(*this);
}

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace ppap::nn
