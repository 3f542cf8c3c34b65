#pragma once

#include <cstddef>

#include "stnet/tensor.hpp"

namespace stnet {

struct SoftmaxResult {
    double loss = 0.0;
    Tensor probs;
};

/// Numerically stable softmax followed by -log(probs[label]).
SoftmaxResult softmax_cross_entropy(const Tensor& logits, std::size_t label);
/// probs - onehot(label)
Tensor softmax_cross_entropy_backward(const SoftmaxResult& forward, std::size_t label);

Tensor softmax(const Tensor& logits);

/// 0.5 * sum((x - x_o)^2) / N, the mean half-squared reconstruction error.
double euclidean_recon_loss(const Tensor& target, const Tensor& output);

struct EuclideanGrads {
    Tensor target;  ///< (x - x_o) / N
    Tensor output;  ///< (x_o - x) / N
};

EuclideanGrads euclidean_recon_loss_backward(const Tensor& target, const Tensor& output);

}  // namespace stnet
