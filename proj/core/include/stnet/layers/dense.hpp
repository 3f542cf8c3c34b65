#pragma once

#include "stnet/tensor.hpp"

namespace stnet {

/// y = W x + b for x flattened to length n, W [m,n], b [m].
Tensor fully_connected(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;    ///< W^T g, shaped like the input
    Tensor weights;  ///< g (outer) x
    Tensor bias;     ///< g
};

DenseGrads fully_connected_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                                    bool need_input_grad = true);

}  // namespace stnet
