#include "stnet/illum/illum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "stnet/error.hpp"

namespace stnet {

namespace {

struct FrameLayout {
    std::size_t outer;   // channels (1 for rank 3)
    std::size_t frames;
    std::size_t pixels;  // h * w
};

FrameLayout frame_layout(const Tensor& x) {
    if (x.rank() == 3) return {1, x.extent(0), x.extent(1) * x.extent(2)};
    if (x.rank() == 4) return {x.extent(0), x.extent(1), x.extent(2) * x.extent(3)};
    throw ShapeError("illumination layers expect [t,h,w] or [c,t,h,w], got " + to_string(x.shape()));
}

void check_mix(const Tensor& mix, std::size_t frames) {
    if (mix.rank() != 2 || mix.extent(1) != frames) {
        throw ShapeError("frame mix " + to_string(mix.shape()) + " does not match " + std::to_string(frames) +
                         " input frames");
    }
}

}  // namespace

IllumParams from_tau_eta(TauEta te, Tensor mix) {
    if (!(te.tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(te.eta >= 0.0)) throw ConfigError("eta must be >= 0");
    IllumParams p;
    p.gamma = 1.0;
    p.delta = 0.0;
    p.beta_shift = 1.0 / te.tau;
    p.alpha_scale = te.eta / te.tau;
    p.mix = std::move(mix);
    return p;
}

TauEta to_tau_eta(const IllumParams& p) { return {1.0 / p.beta_shift, p.alpha_scale / p.beta_shift}; }

void validate(const IllumParams& p, std::size_t frames) {
    if (p.gamma != 0.0 && !(p.beta_shift > 0.0)) throw ConfigError("illumination beta must be > 0 when gamma != 0");
    if (p.gamma != 0.0 && !(p.alpha_scale >= 0.0)) throw ConfigError("illumination alpha must be >= 0");
    check_mix(p.mix, frames);
    if (p.mix.extent(0) != frames) {
        throw ShapeError("frame mix must produce as many frames as it consumes for the product layer");
    }
}

Tensor moving_average_weights(std::size_t n_frames, std::size_t w_size) {
    if (w_size % 2 == 0) throw ConfigError("moving_average_weights: window size must be odd");
    if (n_frames < 1 || w_size < 1 || w_size > 2 * n_frames - 1) {
        throw ConfigError("moving_average_weights: window size must lie in [1, 2*n_frames-1]");
    }
    const std::size_t radius = (w_size - 1) / 2;
    Tensor a({n_frames, n_frames});
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::size_t n = std::min({i, radius, n_frames - 1 - i});
        const double w = 1.0 / static_cast<double>(2 * n + 1);
        for (std::size_t j = i - n; j <= i + n; ++j) a.at({i, j}) = w;
    }
    return a;
}

Tensor elementwise_layer(const Elementwise& op, const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        switch (op.kind) {
            case ElementwiseKind::abs:
                out[i] = std::abs(x);
                break;
            case ElementwiseKind::log: {
                const double arg = op.scale * x + op.shift;
                if (!(arg > 0.0)) throw NumericError("log layer argument must be > 0", i);
                out[i] = std::log(arg);
                break;
            }
            case ElementwiseKind::exp:
                out[i] = std::exp(op.scale * x + op.shift);
                break;
        }
    }
    return out;
}

Tensor elementwise_backward(const Elementwise& op, const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "elementwise_backward");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        double d = 0.0;
        switch (op.kind) {
            case ElementwiseKind::abs:
                d = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                break;
            case ElementwiseKind::log: {
                const double arg = op.scale * x + op.shift;
                if (!(arg > 0.0)) throw NumericError("log layer argument must be > 0", i);
                d = op.scale / arg;
                break;
            }
            case ElementwiseKind::exp:
                d = op.scale * std::exp(op.scale * x + op.shift);
                break;
        }
        out[i] = grad_out[i] * d;
    }
    return out;
}

Tensor prod_layer(const Tensor& x1, const Tensor& x2) {
    require_same_shape(x1, x2, "prod_layer");
    Tensor out(x1.shape());
    for (std::size_t i = 0; i < x1.size(); ++i) out[i] = x1[i] * x2[i];
    return out;
}

std::pair<Tensor, Tensor> prod_backward(const Tensor& x1, const Tensor& x2, const Tensor& grad_out) {
    require_same_shape(x1, x2, "prod_backward");
    require_same_shape(x1, grad_out, "prod_backward");
    return {prod_layer(grad_out, x2), prod_layer(grad_out, x1)};
}

Tensor temporal_mix(const Tensor& input, const Tensor& mix) {
    const FrameLayout l = frame_layout(input);
    check_mix(mix, l.frames);
    const std::size_t t_out = mix.extent(0);
    Shape shape = input.shape();
    shape[input.rank() == 3 ? 0 : 1] = t_out;
    Tensor out(shape);
    const double* x = input.data().data();
    double* y = out.data().data();
    for (std::size_t c = 0; c < l.outer; ++c) {
        for (std::size_t to = 0; to < t_out; ++to) {
            double* yrow = y + (c * t_out + to) * l.pixels;
            for (std::size_t ti = 0; ti < l.frames; ++ti) {
                const double w = mix.at({to, ti});
                if (w == 0.0) continue;
                const double* xrow = x + (c * l.frames + ti) * l.pixels;
                for (std::size_t p = 0; p < l.pixels; ++p) yrow[p] += w * xrow[p];
            }
        }
    }
    return out;
}

MixGrads temporal_mix_backward(const Tensor& input, const Tensor& mix, const Tensor& grad_out) {
    const FrameLayout l = frame_layout(input);
    check_mix(mix, l.frames);
    const std::size_t t_out = mix.extent(0);
    MixGrads g{Tensor(input.shape()), Tensor(mix.shape())};
    const double* x = input.data().data();
    const double* gy = grad_out.data().data();
    double* gx = g.input.data().data();
    for (std::size_t c = 0; c < l.outer; ++c) {
        for (std::size_t to = 0; to < t_out; ++to) {
            const double* grow = gy + (c * t_out + to) * l.pixels;
            for (std::size_t ti = 0; ti < l.frames; ++ti) {
                const double* xrow = x + (c * l.frames + ti) * l.pixels;
                double* gxrow = gx + (c * l.frames + ti) * l.pixels;
                const double w = mix.at({to, ti});
                double acc = 0.0;
                for (std::size_t p = 0; p < l.pixels; ++p) {
                    acc += grow[p] * xrow[p];
                    gxrow[p] += w * grow[p];
                }
                g.mix.at({to, ti}) += acc;
            }
        }
    }
    return g;
}

Tensor illum_forward(const Tensor& input, const IllumParams& p) {
    const FrameLayout l = frame_layout(input);
    validate(p, l.frames);
    if (p.gamma == 0.0) {
        Tensor out = input;
        if (p.delta != 0.0) out *= std::exp(p.delta);
        return out;
    }
    const Tensor mixed = temporal_mix(input, p.mix);
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double arg = p.alpha_scale * std::abs(mixed[i]) + p.beta_shift;
        if (!(arg > 0.0)) throw NumericError("log layer argument must be > 0", i);
        out[i] = input[i] * std::exp(-p.gamma * std::log(arg) + p.delta);
    }
    return out;
}

IllumGrads illum_backward(const Tensor& input, const IllumParams& p, const Tensor& grad_out) {
    const FrameLayout l = frame_layout(input);
    validate(p, l.frames);
    require_same_shape(input, grad_out, "illum_backward");
    if (p.gamma == 0.0) {
        Tensor gx = grad_out;
        if (p.delta != 0.0) gx *= std::exp(p.delta);
        return {std::move(gx), Tensor(p.mix.shape())};
    }
    const Tensor mixed = temporal_mix(input, p.mix);
    Tensor gx(input.shape());
    Tensor gmixed(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double u = mixed[i];
        const double arg = p.alpha_scale * std::abs(u) + p.beta_shift;
        if (!(arg > 0.0)) throw NumericError("log layer argument must be > 0", i);
        const double e = std::exp(-p.gamma * std::log(arg) + p.delta);
        gx[i] = grad_out[i] * e;
        // d/du of x*e: x * e * (-gamma) * alpha * sign(u) / arg
        const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
        gmixed[i] = grad_out[i] * input[i] * e * (-p.gamma) * p.alpha_scale * sign / arg;
    }
    MixGrads mg = temporal_mix_backward(input, p.mix, gmixed);
    gx += mg.input;
    return {std::move(gx), std::move(mg.mix)};
}

Tensor illum_forward_chain(const Tensor& input, const IllumParams& p) {
    const FrameLayout l = frame_layout(input);
    validate(p, l.frames);
    const Tensor mixed = temporal_mix(input, p.mix);
    const Tensor magnitude = elementwise_layer({ElementwiseKind::abs}, mixed);
    const Tensor logged = elementwise_layer({ElementwiseKind::log, p.alpha_scale, p.beta_shift}, magnitude);
    const Tensor scaled = elementwise_layer({ElementwiseKind::exp, -p.gamma, p.delta}, logged);
    return prod_layer(input, scaled);
}

GridSearchResult grid_search_tau_eta(std::span<const double> tau_grid, std::span<const double> eta_grid,
                                     const std::function<double(const TauEta&)>& eval) {
    if (tau_grid.empty() || eta_grid.empty()) throw ConfigError("grid search needs nonempty tau and eta grids");
    GridSearchResult result;
    bool have_best = false;
    for (double tau : tau_grid) {
        for (double eta : eta_grid) {
            GridEntry e{{tau, eta}, eval(TauEta{tau, eta}), false};
            if (!std::isfinite(e.score)) {
                e.score = -std::numeric_limits<double>::infinity();
                e.non_finite = true;
            }
            const bool better = !have_best || e.score > result.best_score ||
                                (e.score == result.best_score &&
                                 std::pair(tau, eta) < std::pair(result.best.tau, result.best.eta));
            if (better) {
                result.best = e.point;
                result.best_score = e.score;
                have_best = true;
            }
            result.table.push_back(e);
        }
    }
    return result;
}

void write_grid_csv(std::ostream& out, const GridSearchResult& result) {
    out << "tau,eta,score\n";
    char buf[128];
    for (const auto& e : result.table) {
        if (e.non_finite) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,-inf\n", e.point.tau, e.point.eta);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", e.point.tau, e.point.eta, e.score);
        }
        out << buf;
    }
}

}  // namespace stnet
