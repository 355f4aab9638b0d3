#include "ppap/nn/graph.h"

#include "ppap/common/error.h"

namespace ppap::nn {

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
    Node & n = nodes_.emplace_back();
    n.value = std::move(value);
    return Var(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(const Tensor<T> & value, Tensor<T> * grad_sink) {
    Node & n = nodes_.emplace_back();
    n.value = value;
    const std::size_t id = nodes_.size() - 1;
    if (record_ && grad_sink) {
        if (grad_sink->shape() != value.shape()) {
            throw UsageError("gradient slot shape " + shape_string(grad_sink->shape()) + " differs from parameter " +
                             shape_string(value.shape()));
        }
        n.needs_grad = true;
        n.backward = [grad_sink](const Tensor<T> & g) {
            T * dst = grad_sink->data();
            const T * src = g.data();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
        };
    }
    return Var(this, id);
}

template <typename T>
Var<T> Graph<T>::emit(Tensor<T> value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    if (record_) {
        for (const Var & in : inputs) needs = needs || nodes_[in.id()].needs_grad;
    }
    Node & n = nodes_.emplace_back();
    n.value = std::move(value);
    n.needs_grad = needs;
    if (needs) n.backward = std::move(backward);
    return Var(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> & Graph<T>::grad(const Var & v) {
    Node & n = nodes_[v.id()];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
}

template <typename T>
void Graph<T>::backward(const Var & loss) {
    if (!record_) throw UsageError("backward() on a graph built without gradient recording");
    Node & root = nodes_[loss.id()];
    if (root.value.size() != 1) {
        throw UsageError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    grad(loss)[0] = T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node & n = nodes_[i];
        if (!n.backward || n.grad.empty()) continue;
        n.backward(n.grad);
    }
}

template class Graph<float>;
template class Graph<double>;

} // namespace ppap::nn
