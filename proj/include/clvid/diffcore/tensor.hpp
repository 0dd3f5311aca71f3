#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "clvid/error.hpp"

namespace clvid::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

// Dense row-major tensor of doubles. Rank 0 is a scalar with one element.
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        for (auto e : shape_)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        for (auto e : shape_)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
        if (data_.size() != shape_size(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                 shape_str(shape_));
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D access; caller guarantees rank 2.
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    double item() const {
        if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

} // namespace clvid::diff
