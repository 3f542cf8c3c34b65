#pragma once

#include <functional>
#include <optional>

#include "stnet/tensor.hpp"

namespace stnet {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central-difference gradient of f at x. Throws NumericError naming the
/// perturbed element when f is not finite there.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

/// Elementwise relative error |a - n| / max(|a|, |n|, floor), maximized over
/// the tensor. Elements where mask is false are skipped.
struct GradCompare {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t compared = 0;
};

inline constexpr double kRelErrorFloor = 1e-3;

GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric,
                              const std::vector<bool>* mask = nullptr,
                              double floor = kRelErrorFloor);

}  // namespace stnet
