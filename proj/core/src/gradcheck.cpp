#include "stnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "stnet/error.hpp"

namespace stnet {

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double up = f(probe);
        probe[i] = orig - eps;
        const double down = f(probe);
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_grad: non-finite function value", i);
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric, const std::vector<bool>* mask,
                              double floor) {
    require_same_shape(analytic, numeric, "compare_gradients");
    GradCompare out;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        const double a = analytic[i];
        const double n = numeric[i];
        const double denom = std::max({std::abs(a), std::abs(n), floor});
        const double rel = std::abs(a - n) / denom;
        ++out.compared;
        if (!(rel <= out.max_rel_error)) {
            out.max_rel_error = rel;
            out.worst_index = i;
        }
    }
    return out;
}

}  // namespace stnet
