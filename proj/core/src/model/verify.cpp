#include "stnet/model/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "stnet/error.hpp"
#include "stnet/gradcheck.hpp"
#include "stnet/illum/illum.hpp"
#include "stnet/layers/activation.hpp"
#include "stnet/layers/conv.hpp"
#include "stnet/layers/dense.hpp"
#include "stnet/layers/loss.hpp"
#include "stnet/model/network.hpp"
#include "stnet/rng.hpp"

namespace stnet {
namespace {

using Args = std::vector<Tensor>;
using Objective = std::function<double(const Args&)>;
constexpr double kEps = 1e-5;

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<bool> away_from_zero(const Tensor& x, std::size_t& excluded) {
    std::vector<bool> mask(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = std::abs(x[i]) >= kKinkMargin;
        if (!mask[i]) ++excluded;
    }
    return mask;
}

// Compares analytic[i] with the numeric gradient of f in args[i] for all i.
GradCheckRow compare_all(const std::string& name, const Objective& f, const Args& args, Args analytic, double perturb,
                         const std::vector<std::vector<bool>>& masks = {}, std::size_t excluded = 0) {
    GradCheckRow row{name, 0.0, kLayerGradTolerance, 0, excluded};
    for (std::size_t i = 0; i < args.size(); ++i) {
        Args probe = args;
        const auto fi = [&](const Tensor& x) {
            probe[i] = x;
            return f(probe);
        };
        const Tensor numeric = finite_diff_grad(fi, args[i], kEps);
        analytic[i] *= 1.0 + perturb;
        const std::vector<bool>* mask = i < masks.size() && !masks[i].empty() ? &masks[i] : nullptr;
        const GradCompare cmp = compare_gradients(analytic[i], numeric, mask);
        row.max_rel_error = std::max(row.max_rel_error, cmp.max_rel_error);
        row.compared += cmp.compared;
    }
    return row;
}

Tensor random(const Shape& shape, std::uint64_t seed, const std::string& tag, double lo, double hi) {
    return fill_random(shape, derive_seed(seed, tag), UniformDist{lo, hi});
}

GradCheckRow check_conv(std::uint64_t seed, double perturb, bool transposed) {
    const ConvSpec spec{3, 3, 3, 2, 1, 1};
    const Shape in_shape = transposed ? Shape{3, 3, 4, 4} : Shape{2, 5, 7, 7};
    const Tensor x = random(in_shape, seed, "x", -1, 1);
    const Tensor k = random(conv_kernel_shape(spec, 2), seed, "k", -1, 1);
    const Tensor b = random({transposed ? 2u : 3u}, seed, "b", -1, 1);
    const auto run = [&](const Args& a) {
        Tensor y = transposed ? deconv3d(a[0], a[1], spec) : conv3d(a[0], a[1], spec);
        add_channel_bias(y, a[2]);
        return y;
    };
    const Tensor r = random(run({x, k, b}).shape(), seed, "r", -1, 1);
    const ConvGrads g = transposed ? deconv3d_backward(x, k, r, spec) : conv3d_backward(x, k, r, spec);
    return compare_all(transposed ? "deconv3d" : "conv3d", [&](const Args& a) { return dot(run(a), r); }, {x, k, b},
                       {g.input, g.kernels, channel_bias_grad(r)}, perturb);
}

GradCheckRow check_fc(std::uint64_t seed, double perturb) {
    const Tensor x = random({2, 3, 4}, seed, "x", -1, 1);
    const Tensor w = random({5, 24}, seed, "w", -1, 1);
    const Tensor b = random({5}, seed, "b", -1, 1);
    const Tensor r = random({5}, seed, "r", -1, 1);
    const DenseGrads g = fully_connected_backward(x, w, r);
    return compare_all("fc", [&](const Args& a) { return dot(fully_connected(a[0], a[1], a[2]), r); }, {x, w, b},
                       {g.input, g.weights, g.bias}, perturb);
}

GradCheckRow check_relu(std::uint64_t seed, double perturb) {
    const Tensor x = random({3, 4, 5}, seed, "x", -1, 1);
    const Tensor r = random(x.shape(), seed, "r", -1, 1);
    std::size_t excluded = 0;
    const auto mask = away_from_zero(x, excluded);
    return compare_all("relu", [&](const Args& a) { return dot(relu(a[0]), r); }, {x}, {relu_backward(x, r)}, perturb,
                       {mask}, excluded);
}

GradCheckRow check_lrn(std::uint64_t seed, double perturb) {
    // A strong alpha so the cross-channel term matters.
    const LrnParams p{5, 2.0, 0.5, 0.75};
    const Tensor x = random({7, 2, 3, 3}, seed, "x", -1, 1);
    const Tensor r = random(x.shape(), seed, "r", -1, 1);
    return compare_all("lrn", [&](const Args& a) { return dot(lrn(a[0], p), r); }, {x}, {lrn_backward(x, r, p)},
                       perturb);
}

GradCheckRow check_elementwise(const std::string& name, std::uint64_t seed, double perturb) {
    Elementwise op;
    Tensor x;
    if (name == "abs") {
        op = {ElementwiseKind::abs, 1.0, 0.0};
        x = random({4, 5, 6}, seed, "x", -1, 1);
    } else if (name == "log") {
        op = {ElementwiseKind::log, 1.5, 0.5};
        x = random({4, 5, 6}, seed, "x", 0.1, 1);
    } else {
        op = {ElementwiseKind::exp, -0.7, 0.3};
        x = random({4, 5, 6}, seed, "x", -1, 1);
    }
    const Tensor r = random(x.shape(), seed, "r", -1, 1);
    std::size_t excluded = 0;
    std::vector<std::vector<bool>> masks;
    if (op.kind == ElementwiseKind::abs) masks.push_back(away_from_zero(x, excluded));
    return compare_all(name, [&](const Args& a) { return dot(elementwise_layer(op, a[0]), r); }, {x},
                       {elementwise_backward(op, x, r)}, perturb, masks, excluded);
}

GradCheckRow check_prod(std::uint64_t seed, double perturb) {
    const Tensor x1 = random({3, 4, 5}, seed, "x1", -1, 1);
    const Tensor x2 = random({3, 4, 5}, seed, "x2", -1, 1);
    const Tensor r = random(x1.shape(), seed, "r", -1, 1);
    auto [g1, g2] = prod_backward(x1, x2, r);
    return compare_all("prod", [&](const Args& a) { return dot(prod_layer(a[0], a[1]), r); }, {x1, x2},
                       {std::move(g1), std::move(g2)}, perturb);
}

GradCheckRow check_softmax(std::uint64_t seed, double perturb) {
    const Tensor z = random({8}, seed, "z", -3, 3);
    const std::size_t label = seed % 8;
    const Tensor g = softmax_cross_entropy_backward(softmax_cross_entropy(z, label), label);
    return compare_all("softmax_ce", [&](const Args& a) { return softmax_cross_entropy(a[0], label).loss; }, {z}, {g},
                       perturb);
}

GradCheckRow check_euclidean(std::uint64_t seed, double perturb) {
    const Tensor t = random({2, 3, 4, 4}, seed, "t", 0, 1);
    const Tensor o = random({2, 3, 4, 4}, seed, "o", 0, 1);
    EuclideanGrads g = euclidean_recon_loss_backward(t, o);
    return compare_all("euclidean", [&](const Args& a) { return euclidean_recon_loss(a[0], a[1]); }, {t, o},
                       {std::move(g.target), std::move(g.output)}, perturb);
}

GradCheckRow check_mix(std::uint64_t seed, double perturb) {
    const Tensor x = random({2, 9, 3, 3}, seed, "x", -1, 1);
    const Tensor m = random({9, 9}, seed, "m", -1, 1);
    const Tensor r = random(x.shape(), seed, "r", -1, 1);
    MixGrads g = temporal_mix_backward(x, m, r);
    return compare_all("temporal_mix", [&](const Args& a) { return dot(temporal_mix(a[0], a[1]), r); }, {x, m},
                       {std::move(g.input), std::move(g.mix)}, perturb);
}

GradCheckRow check_illum(std::uint64_t seed, double perturb) {
    const Tensor x = random({9, 4, 4}, seed, "x", 0.05, 1);
    const Tensor m = random({9, 9}, seed, "m", 0.02, 0.3);
    const Tensor r = random(x.shape(), seed, "r", -1, 1);
    const auto params = [](const Tensor& mix) { return IllumParams{0.8, 0.5, 1.2, 0.1, mix}; };
    IllumGrads g = illum_backward(x, params(m), r);
    return compare_all("illum", [&](const Args& a) { return dot(illum_forward(a[0], params(a[1])), r); }, {x, m},
                       {std::move(g.input), std::move(g.mix)}, perturb);
}

// Sign of every activation entering a module; a change between probes
// means the probe crossed a kink somewhere in the network.
std::vector<signed char> activation_signs(const ForwardPass& pass) {
    std::vector<signed char> s;
    for (const auto* steps : {&pass.trunk, &pass.decoder, &pass.head}) {
        for (const Step& st : *steps) {
            for (double v : st.input.data()) s.push_back(static_cast<signed char>((v > 0) - (v < 0)));
        }
    }
    return s;
}

}  // namespace

const std::vector<std::string>& layer_check_names() {
    static const std::vector<std::string> names = {"conv3d", "deconv3d", "fc",         "relu",      "lrn",
                                                   "abs",    "log",      "exp",        "prod",      "softmax_ce",
                                                   "euclidean", "temporal_mix", "illum"};
    return names;
}

GradCheckRow check_layer_gradients(const std::string& name, std::uint64_t seed, double perturb) {
    if (name == "conv3d") return check_conv(seed, perturb, false);
    if (name == "deconv3d") return check_conv(seed, perturb, true);
    if (name == "fc") return check_fc(seed, perturb);
    if (name == "relu") return check_relu(seed, perturb);
    if (name == "lrn") return check_lrn(seed, perturb);
    if (name == "abs" || name == "log" || name == "exp") return check_elementwise(name, seed, perturb);
    if (name == "prod") return check_prod(seed, perturb);
    if (name == "softmax_ce") return check_softmax(seed, perturb);
    if (name == "euclidean") return check_euclidean(seed, perturb);
    if (name == "temporal_mix") return check_mix(seed, perturb);
    if (name == "illum") return check_illum(seed, perturb);
    throw ConfigError("unknown layer '" + name + "' for gradient check");
}

GradCheckRow check_network_gradients(std::uint64_t seed, double perturb) {
    NetworkConfig cfg = make_config(tiny_preset(), Topology::semisupervised, FrontEnd::illum, seed);
    Network net = build_network(cfg);
    ParamStore& params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& n = params.name(i);
        if (n.size() > 5 && n.compare(n.size() - 5, 5, ".bias") == 0) {
            params.value(i) = random(params.value(i).shape(), seed, n, -0.1, 0.1);
        }
    }
    const Tensor clip = random(cfg.input, seed, "clip", 0.05, 0.95);
    const std::size_t label = seed % net.num_classes();
    const LossWeights weights{0.7, 1.3};

    const ForwardPass base = net.forward(clip, label, weights);
    Gradients grads = params.zero_grads();
    net.backward(base, grads);
    const auto base_signs = activation_signs(base);

    GradCheckRow row{"network", 0.0, kNetworkGradTolerance, 0, 0};
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params.value(i);
        Tensor numeric(w.shape());
        std::vector<bool> mask(w.size(), true);
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double orig = w[j];
            w[j] = orig + kEps;
            const ForwardPass up = net.forward(clip, label, weights);
            w[j] = orig - kEps;
            const ForwardPass down = net.forward(clip, label, weights);
            w[j] = orig;
            numeric[j] = (up.losses.total - down.losses.total) / (2.0 * kEps);
            if (activation_signs(up) != base_signs || activation_signs(down) != base_signs) {
                mask[j] = false;
                ++row.excluded;
            }
        }
        Tensor analytic = grads[i];
        analytic *= 1.0 + perturb;
        const GradCompare cmp = compare_gradients(analytic, numeric, &mask);
        row.max_rel_error = std::max(row.max_rel_error, cmp.max_rel_error);
        row.compared += cmp.compared;
    }
    return row;
}

}  // namespace stnet
