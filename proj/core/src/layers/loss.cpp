#include "stnet/layers/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stnet/error.hpp"

namespace stnet {

Tensor softmax(const Tensor& logits) {
    const double top = *std::max_element(logits.data().begin(), logits.data().end());
    Tensor probs({logits.size()});
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - top);
        total += probs[i];
    }
    probs *= 1.0 / total;
    return probs;
}

SoftmaxResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (label >= logits.size()) {
        throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.size()) + " classes");
    }
    const double top = *std::max_element(logits.data().begin(), logits.data().end());
    double total = 0.0;
    for (double v : logits.data()) total += std::exp(v - top);
    SoftmaxResult out;
    out.loss = -(logits[label] - top - std::log(total));
    out.probs = softmax(logits);
    return out;
}

Tensor softmax_cross_entropy_backward(const SoftmaxResult& forward, std::size_t label) {
    if (label >= forward.probs.size()) throw ShapeError("softmax_cross_entropy_backward: label out of range");
    Tensor grad = forward.probs;
    grad[label] -= 1.0;
    return grad;
}

double euclidean_recon_loss(const Tensor& target, const Tensor& output) {
    require_same_shape(target, output, "euclidean_recon_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - output[i];
        acc += d * d;
    }
    return 0.5 * acc / static_cast<double>(target.size());
}

EuclideanGrads euclidean_recon_loss_backward(const Tensor& target, const Tensor& output) {
    require_same_shape(target, output, "euclidean_recon_loss_backward");
    const double inv = 1.0 / static_cast<double>(target.size());
    EuclideanGrads g{Tensor(target.shape()), Tensor(target.shape())};
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = (output[i] - target[i]) * inv;
        g.output[i] = d;
        g.target[i] = -d;
    }
    return g;
}

}  // namespace stnet
