#include "stnet/layers/activation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stnet/error.hpp"

namespace stnet {

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

void validate(const LrnParams& p) {
    if (p.size < 1 || p.size % 2 == 0) throw ConfigError("lrn: window size must be odd and >= 1");
    if (!(p.bias > 0.0)) throw ConfigError("lrn: bias k must be > 0");
    if (!(p.alpha >= 0.0)) throw ConfigError("lrn: alpha must be >= 0");
    if (!(p.beta > 0.0)) throw ConfigError("lrn: beta must be > 0");
}

namespace {

// scale_i = k + alpha/n * sum of squares over the clamped window, per position.
std::vector<double> lrn_scale(const Tensor& input, const LrnParams& p, std::size_t channels, std::size_t per) {
    const long half = static_cast<long>(p.size / 2);
    const double coeff = p.alpha / static_cast<double>(p.size);
    std::vector<double> scale(input.size());
    const double* a = input.data().data();
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = static_cast<std::size_t>(std::max(0L, static_cast<long>(c) - half));
        const std::size_t hi = std::min(channels - 1, c + static_cast<std::size_t>(half));
        for (std::size_t i = 0; i < per; ++i) {
            double acc = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) acc += a[j * per + i] * a[j * per + i];
            scale[c * per + i] = p.bias + coeff * acc;
        }
    }
    return scale;
}

}  // namespace

Tensor lrn(const Tensor& input, const LrnParams& p) {
    validate(p);
    const std::size_t channels = input.extent(0);
    const std::size_t per = input.size() / channels;
    const auto scale = lrn_scale(input, p, channels, per);
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] * std::pow(scale[i], -p.beta);
    return out;
}

Tensor lrn_backward(const Tensor& input, const Tensor& grad_out, const LrnParams& p) {
    validate(p);
    require_same_shape(input, grad_out, "lrn_backward");
    const std::size_t channels = input.extent(0);
    const std::size_t per = input.size() / channels;
    const auto scale = lrn_scale(input, p, channels, per);
    // ratio_i = g_i a_i scale_i^(-beta-1)
    std::vector<double> ratio(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) ratio[i] = grad_out[i] * input[i] * std::pow(scale[i], -p.beta - 1.0);
    const long half = static_cast<long>(p.size / 2);
    const double coeff = 2.0 * p.alpha * p.beta / static_cast<double>(p.size);
    Tensor out(input.shape());
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = static_cast<std::size_t>(std::max(0L, static_cast<long>(c) - half));
        const std::size_t hi = std::min(channels - 1, c + static_cast<std::size_t>(half));
        for (std::size_t i = 0; i < per; ++i) {
            double acc = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) acc += ratio[j * per + i];
            const std::size_t idx = c * per + i;
            out[idx] = grad_out[idx] * std::pow(scale[idx], -p.beta) - coeff * input[idx] * acc;
        }
    }
    return out;
}

}  // namespace stnet
