#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ppap::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape & shape);
std::string shape_string(const Shape & shape);

// Dense row-major tensor. T is float for training/inference and double for
// gradient checks.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> data);

    const Shape & shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T * data() { return data_.data(); }
    const T * data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::vector<T> & storage() { return data_; }
    const std::vector<T> & storage() const { return data_; }

    T & operator[](std::size_t i) { return data_[i]; }
    const T & operator[](std::size_t i) const { return data_[i]; }

    // Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(T value);
    bool all_finite() const;

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace ppap::nn
