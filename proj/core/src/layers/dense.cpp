#include "stnet/layers/dense.hpp"

#include <string>

#include "../detail/gemm.hpp"
#include "stnet/error.hpp"

namespace stnet {

namespace {

void check(const Tensor& input, const Tensor& weights) {
    if (weights.rank() != 2) throw ShapeError("fully_connected: weights must be [m,n]");
    if (weights.extent(1) != input.size()) {
        throw ShapeError("fully_connected: input length " + std::to_string(input.size()) +
                         " does not match weight columns " + std::to_string(weights.extent(1)));
    }
}

}  // namespace

Tensor fully_connected(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    check(input, weights);
    const std::size_t m = weights.extent(0);
    if (bias.size() != m) throw ShapeError("fully_connected: bias length does not match weight rows");
    Tensor y({m}, std::vector<double>(bias.values()));
    detail::gemm_nt(m, 1, input.size(), weights.data().data(), input.data().data(), y.data().data());
    return y;
}

DenseGrads fully_connected_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                                    bool need_input_grad) {
    check(input, weights);
    const std::size_t m = weights.extent(0);
    const std::size_t n = weights.extent(1);
    if (grad_out.size() != m) throw ShapeError("fully_connected_backward: grad length does not match weight rows");
    DenseGrads out;
    out.weights = Tensor({m, n});
    detail::gemm_nn(m, n, 1, grad_out.data().data(), input.data().data(), out.weights.data().data());
    out.bias = Tensor({m}, std::vector<double>(grad_out.values()));
    if (need_input_grad) {
        out.input = Tensor(input.shape());
        detail::gemm_tn(1, n, m, grad_out.data().data(), weights.data().data(), out.input.data().data());
    }
    return out;
}

}  // namespace stnet
