#pragma once

#include <cstddef>

#include "stnet/tensor.hpp"

namespace stnet {

/// max(0, x); the derivative at exactly 0 is taken as 0.
Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Cross-channel local response normalization parameters.
struct LrnParams {
    std::size_t size = 5;  ///< window n, odd
    double bias = 1.0;     ///< k
    double alpha = 1e-4;
    double beta = 0.75;

    friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

void validate(const LrnParams& params);

/// b_i = a_i / (k + alpha/n * sum_{j in window(i)} a_j^2)^beta over axis 0,
/// the window centered on i and clamped at the channel boundaries.
Tensor lrn(const Tensor& input, const LrnParams& params);
Tensor lrn_backward(const Tensor& input, const Tensor& grad_out, const LrnParams& params);

}  // namespace stnet
