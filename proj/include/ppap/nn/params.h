#pragma once

#include "ppap/nn/tensor.h"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ppap::nn {

// Named tensors in insertion order. Every entry owns a gradient slot of the
// same shape. Non-trainable entries (batch-norm running statistics) are
// serialised with the weights but never touched by the optimiser.
template <typename T>
class ParameterSet {
public:
    std::uint64_t seed = 0;

    void add(const std::string & name, Tensor<T> value, bool trainable = true);
    bool contains(const std::string & name) const { return entries_.count(name) != 0; }
    std::size_t size() const { return order_.size(); }
    const std::vector<std::string> & names() const { return order_; }

    Tensor<T> & value(const std::string & name);
    const Tensor<T> & value(const std::string & name) const;
    Tensor<T> & grad(const std::string & name);
    const Tensor<T> & grad(const std::string & name) const;
    bool trainable(const std::string & name) const;

    void zero_grad();
    std::size_t scalar_count(bool trainable_only = false) const;

    template <typename U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out;
        out.seed = seed;
        for (const auto & name : order_) {
            const Entry & e = entries_.at(name);
            out.add(name, e.value.template cast<U>(), e.trainable);
        }
        return out;
    }

private:
    struct Entry {
        Tensor<T> value;
        Tensor<T> grad;
        bool trainable = true;
    };
    const Entry & entry(const std::string & name) const;

    std::vector<std::string> order_;
    std::map<std::string, Entry> entries_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are allocated on first step for
// every trainable parameter.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(ParameterSet<T> & params);
    std::uint64_t step_count() const { return steps_; }
    const AdamConfig & config() const { return config_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::map<std::string, Moments> moments_;
};

extern template class Adam<float>;
extern template class Adam<double>;

} // namespace ppap::nn
