#include "ppap/nn/params.h"

#include "ppap/common/error.h"

#include <cmath>

namespace ppap::nn {

template <typename T>
void ParameterSet<T>::add(const std::string & name, Tensor<T> value, bool trainable) {
    if (entries_.count(name)) throw UsageError("duplicate parameter name: " + name);
    Entry e;
    e.grad = Tensor<T>(value.shape());
    e.value = std::move(value);
    e.trainable = trainable;
    entries_.emplace(name, std::move(e));
    order_.push_back(name);
}

template <typename T>
const typename ParameterSet<T>::Entry & ParameterSet<T>::entry(const std::string & name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
}

template <typename T>
Tensor<T> & ParameterSet<T>::value(const std::string & name) {
    return const_cast<Entry &>(entry(name)).value;
}

template <typename T>
const Tensor<T> & ParameterSet<T>::value(const std::string & name) const {
    return entry(name).value;
}

template <typename T>
Tensor<T> & ParameterSet<T>::grad(const std::string & name) {
    return const_cast<Entry &>(entry(name)).grad;
}

template <typename T>
const Tensor<T> & ParameterSet<T>::grad(const std::string & name) const {
    return entry(name).grad;
}

template <typename T>
bool ParameterSet<T>::trainable(const std::string & name) const {
    return entry(name).trainable;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
    for (auto & [name, e] : entries_) e.grad.fill(T(0));
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count(bool trainable_only) const {
    std::size_t n = 0;
    for (const auto & [name, e] : entries_) {
        if (!trainable_only || e.trainable) n += e.value.size();
    }
    return n;
}

template <typename T>
void Adam<T>::step(ParameterSet<T> & params) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);
    for (const auto & name : params.names()) {
        if (!params.trainable(name)) continue;
        Tensor<T> & w = params.value(name);
        const Tensor<T> & g = params.grad(name);
        Moments & mom = moments_[name];
        if (mom.m.size() != w.size()) {
            mom.m.assign(w.size(), 0.0);
            mom.v.assign(w.size(), 0.0);
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * gi;
            mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * gi * gi;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            w[i] = static_cast<T>(w[i] - config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
        }
    }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Adam<float>;
template class Adam<double>;

} // namespace ppap::nn
