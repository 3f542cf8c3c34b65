#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stnet {

using Shape = std::vector<std::size_t>;

std::size_t volume(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles (last axis fastest).
///
/// Activations use the axis order (channels, frames, height, width). The
/// tensor is a plain value: copies are deep, moves are cheap.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor from(std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Flat index for a full multi-index; throws ShapeError on rank or range mismatch.
    std::size_t offset(std::span<const std::size_t> index) const;
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    /// Same data under a new shape of equal volume.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double value);
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double scale);

    /// Adds scale * other elementwise.
    void axpy(double scale, const Tensor& other);

    double sum() const;
    double squared_norm() const;
    double max_abs() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace stnet
