#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "stnet/tensor.hpp"

namespace stnet {

/// Constants of the illumination transfer function
///   H(x) = x * e^delta / (alpha * |F(x)| + beta)^gamma
/// where F mixes frames with the [t_out, t_in] matrix `mix` at every pixel.
/// alpha/beta/gamma/delta stay fixed during training; `mix` is trainable.
struct IllumParams {
    double alpha_scale = 1.0;
    double beta_shift = 1.0;
    double gamma = 1.0;
    double delta = 0.0;
    Tensor mix;

    friend bool operator==(const IllumParams&, const IllumParams&) = default;
};

/// Reciprocal form tau * x / (1 + eta * |F(x)|).
struct TauEta {
    double tau = 1.0;
    double eta = 1.0;
    friend bool operator==(const TauEta&, const TauEta&) = default;
};

/// gamma = 1, delta = 0, beta = 1/tau, alpha = eta/tau.
IllumParams from_tau_eta(TauEta te, Tensor mix);
/// Only meaningful for gamma = 1, delta = 0.
TauEta to_tau_eta(const IllumParams& p);

void validate(const IllumParams& p, std::size_t frames);

/// Banded row-stochastic moving-average matrix used to initialize the frame
/// mixer. Row i averages frames i-n..i+n with n = min(i, (w_size-1)/2,
/// n_frames-1-i).
Tensor moving_average_weights(std::size_t n_frames, std::size_t w_size);

enum class ElementwiseKind { abs, log, exp };

/// |x|, ln(scale*x + shift) or e^(scale*x + shift).
struct Elementwise {
    ElementwiseKind kind = ElementwiseKind::abs;
    double scale = 1.0;
    double shift = 0.0;
};

Tensor elementwise_layer(const Elementwise& op, const Tensor& input);
Tensor elementwise_backward(const Elementwise& op, const Tensor& input, const Tensor& grad_out);

/// Hadamard product of two equally shaped tensors.
Tensor prod_layer(const Tensor& x1, const Tensor& x2);
std::pair<Tensor, Tensor> prod_backward(const Tensor& x1, const Tensor& x2, const Tensor& grad_out);

/// Applies mix across the frame axis of a [t,h,w] or [c,t,h,w] tensor.
Tensor temporal_mix(const Tensor& input, const Tensor& mix);

struct MixGrads {
    Tensor input;
    Tensor mix;
};

MixGrads temporal_mix_backward(const Tensor& input, const Tensor& mix, const Tensor& grad_out);

/// Fused transfer function.
Tensor illum_forward(const Tensor& input, const IllumParams& p);

struct IllumGrads {
    Tensor input;
    Tensor mix;
};

IllumGrads illum_backward(const Tensor& input, const IllumParams& p, const Tensor& grad_out);

/// Same function evaluated layer by layer: mix -> Abs -> Log -> Exp -> Prod.
Tensor illum_forward_chain(const Tensor& input, const IllumParams& p);

struct GridEntry {
    TauEta point;
    double score = 0.0;
    bool non_finite = false;
};

struct GridSearchResult {
    TauEta best;
    double best_score = 0.0;
    std::vector<GridEntry> table;  ///< row-major over (tau, eta)
};

/// Exhaustive search maximizing eval; non-finite scores count as -inf and
/// ties go to the lexicographically smallest (tau, eta).
GridSearchResult grid_search_tau_eta(std::span<const double> tau_grid, std::span<const double> eta_grid,
                                     const std::function<double(const TauEta&)>& eval);

/// CSV with header tau,eta,score.
void write_grid_csv(std::ostream& out, const GridSearchResult& result);

}  // namespace stnet
