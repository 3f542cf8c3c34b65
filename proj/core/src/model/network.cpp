#include "stnet/model/network.hpp"

#include <algorithm>
#include <cmath>

#include "stnet/error.hpp"
#include "stnet/layers/loss.hpp"
#include "stnet/rng.hpp"

namespace stnet {

std::string to_string(Topology t) {
    switch (t) {
        case Topology::autoencoder:
            return "autoencoder";
        case Topology::predictor:
            return "predictor";
        case Topology::semisupervised:
            return "semisupervised";
    }
    return "?";
}

std::string to_string(FrontEnd f) {
    switch (f) {
        case FrontEnd::none:
            return "none";
        case FrontEnd::lrn:
            return "lrn";
        case FrontEnd::illum:
            return "illum";
    }
    return "?";
}

Topology parse_topology(const std::string& text) {
    if (text == "autoencoder") return Topology::autoencoder;
    if (text == "predictor") return Topology::predictor;
    if (text == "semisupervised" || text == "semisup") return Topology::semisupervised;
    throw ConfigError("unknown topology '" + text + "'");
}

FrontEnd parse_front_end(const std::string& text) {
    if (text == "none") return FrontEnd::none;
    if (text == "lrn") return FrontEnd::lrn;
    if (text == "illum") return FrontEnd::illum;
    throw ConfigError("unknown front-end '" + text + "'");
}

Preset paper_preset() {
    Preset p;
    p.name = "paper";
    p.side = 145;
    p.frames = 9;
    // The FC after the code projects back to the innermost conv volume (384 x 1 x 29 x 29).
    p.autoencoder =
        "C(96,11,3)-N-C(256,5,2)-N-C(384,3,2)-N-FC(4096)-FC(322944)-DC(384,3,2)-N-DC(256,5,2)-N-DC(96,11,3)";
    p.head = "FC(8192)-FC(4096)-FC(1000)-FC(500)-FC(8)";
    p.strides = {{4, 2, 1}, {1, 2, 0}, {1, 1, 0}};
    return p;
}

Preset desk_preset() {
    Preset p;
    p.name = "desk";
    p.side = 33;
    p.frames = 9;
    p.autoencoder = "C(12,11,3)-N-C(32,5,2)-N-C(48,3,2)-N-FC(256)-FC(48)-DC(48,3,2)-N-DC(32,5,2)-N-DC(12,11,3)";
    p.head = "FC(512)-FC(256)-FC(62)-FC(31)-FC(8)";
    p.strides = {{4, 2, 1}, {1, 2, 0}, {1, 1, 0}};
    return p;
}

Preset tiny_preset() {
    Preset p;
    p.name = "tiny";
    p.side = 9;
    p.frames = 3;
    p.autoencoder = "C(2,3,2)-N(3,2,0.5,0.75)-C(3,3,2)-N(3,2,0.5,0.75)-FC(4)-FC(12)-DC(3,3,2)-N(3,2,0.5,0.75)-DC(2,3,2)";
    p.head = "FC(5)-FC(3)";
    p.strides = {{2, 1, 0}, {1, 1, 0}, {1, 1, 0}, {2, 1, 0}};
    return p;
}

Preset preset_by_name(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "desk") return desk_preset();
    if (name == "tiny") return tiny_preset();
    throw ConfigError("unknown preset '" + name + "'");
}

NetworkConfig make_config(const Preset& preset, Topology topology, FrontEnd front_end, std::uint64_t seed) {
    NetworkConfig c;
    c.preset = preset.name;
    c.input = {1, preset.frames, preset.side, preset.side};
    c.autoencoder = parse_arch(preset.autoencoder, preset.strides);
    c.head = parse_arch(preset.head);
    c.topology = topology;
    c.front_end = front_end;
    c.seed = seed;
    return c;
}

namespace {

bool has_explicit_relu(const ArchSpec& arch) {
    return std::any_of(arch.layers.begin(), arch.layers.end(),
                       [](const LayerDesc& l) { return std::holds_alternative<layer::Relu>(l); });
}

/// Walks the architecture, inferring shapes and optionally creating modules
/// and parameters.
class Builder {
public:
    Builder(const NetworkConfig& config, bool allocate) : config_(config), allocate_(allocate) {}

    Network* net = nullptr;
    NetworkPlan plan;
    ParamStore params;
    std::vector<std::shared_ptr<const Module>> modules;

    void build(std::vector<std::size_t>& front, std::vector<std::vector<std::size_t>>& enc_blocks,
               std::vector<std::size_t>& code, std::vector<std::size_t>& dec_fc,
               std::vector<std::vector<std::size_t>>& dec_blocks, std::vector<std::size_t>& head) {
        const auto& layers = config_.autoencoder.layers;
        if (config_.input.size() != 4 || config_.input[0] != 1) {
            throw ShapeError("network input must be a single-channel [1,frames,height,width] clip");
        }
        shape_ = config_.input;
        previous_ = "input";
        implicit_relu_ = !has_explicit_relu(config_.autoencoder);
        std::size_t i = 0;

        // Front-end.
        FrontEnd front_kind = config_.front_end;
        double alpha = config_.illum_alpha, beta = config_.illum_beta, gamma = config_.illum_gamma,
               delta = config_.illum_delta;
        std::size_t mix_rows = shape_[1];
        std::size_t mix_cols = shape_[1];
        if (!layers.empty() && std::holds_alternative<layer::IllumChain>(layers[0])) {
            const auto& chain = std::get<layer::IllumChain>(layers[0]);
            front_kind = FrontEnd::illum;
            alpha = chain.log_scale;
            beta = chain.log_shift;
            gamma = -chain.exp_scale;
            delta = chain.exp_shift;
            mix_rows = chain.mix_filters;
            mix_cols = chain.mix_temporal;
            ++i;
        }
        if (front_kind == FrontEnd::illum) {
            if (mix_rows != shape_[1] || mix_cols != shape_[1]) {
                throw ShapeError("illumination mix C(" + std::to_string(mix_rows) + ",1," + std::to_string(mix_cols) +
                                 ") does not match " + std::to_string(shape_[1]) + " input frames");
            }
            if (gamma != 0.0 && !(beta > 0.0)) throw ConfigError("illumination beta must be > 0");
            const std::size_t mix = add_param("front.mix", {mix_rows, mix_cols}, Init::moving_average, 0, 0);
            front.push_back(add(std::make_shared<IllumModule>("front.illum", alpha, beta, gamma, delta, mix), "front"));
        } else if (front_kind == FrontEnd::lrn) {
            validate(config_.front_lrn);
            front.push_back(add(std::make_shared<LrnModule>("front.lrn", config_.front_lrn, true), "front"));
        }

        // Encoder blocks: each C token plus the ReLU/N tokens that follow it.
        std::vector<Shape> pair_inputs;
        std::vector<ConvSpec> pair_specs;
        while (i < layers.size() && !std::holds_alternative<layer::Full>(layers[i])) {
            const auto* conv = std::get_if<layer::Conv>(&layers[i]);
            if (!conv) throw ShapeError("expected C layer before FC, got " + layer_name(layers[i]));
            const std::size_t k = enc_blocks.size() + 1;
            const std::string prefix = "enc" + std::to_string(k);
            std::vector<std::size_t> block;
            pair_inputs.push_back(shape_);
            pair_specs.push_back(conv->spec);
            const std::size_t in_channels = shape_[0];
            const std::size_t kernels = add_param(prefix + ".kernels", conv_kernel_shape(conv->spec, in_channels),
                                                  Init::fan, conv_fan(conv->spec, in_channels, true),
                                                  conv_fan(conv->spec, in_channels, false));
            const std::size_t bias = add_param(prefix + ".bias", {conv->spec.filters}, Init::zero, 0, 0);
            block.push_back(add(std::make_shared<ConvModule>(prefix + ".conv", conv->spec, kernels, bias), "encoder",
                                layer_name(layers[i])));
            if (implicit_relu_) block.push_back(add(std::make_shared<ReluModule>(prefix + ".relu"), "encoder"));
            ++i;
            i = trailing(layers, i, prefix, "encoder", block);
            enc_blocks.push_back(block);
        }
        plan.pair_count = enc_blocks.size();
        if (i >= layers.size()) throw ShapeError("architecture has no FC code layer");
        const Shape innermost = shape_;

        // Code layer.
        code.push_back(add(std::make_shared<ReshapeModule>("code.flatten", Shape{volume(shape_)}), "code"));
        {
            const auto& full = std::get<layer::Full>(layers[i]);
            code.push_back(dense("code", full.width, "code", layer_name(layers[i])));
            if (implicit_relu_) code.push_back(add(std::make_shared<ReluModule>("code.relu"), "code"));
            ++i;
            i = trailing(layers, i, "code", "code", code);
            plan.code_width = full.width;
        }
        const Shape code_shape = shape_;
        const std::string code_name = previous_;

        // Remaining FC tokens: decoder projection, or the head of a literal predictor shorthand.
        std::vector<std::size_t> extra_fc;
        std::size_t fc_start = i;
        while (i < layers.size() && !std::holds_alternative<layer::Deconv>(layers[i])) ++i;
        const std::size_t fc_end = i;
        const bool use_decoder = config_.topology != Topology::predictor;

        if (use_decoder) {
            if (fc_end == layers.size()) throw ShapeError("autoencoder architecture has no DC layers");
            std::size_t j = fc_start;
            std::size_t n = 0;
            while (j < fc_end) {
                const auto* full = std::get_if<layer::Full>(&layers[j]);
                if (!full) throw ShapeError("expected FC between code and decoder, got " + layer_name(layers[j]));
                const std::string prefix = "dfc" + std::to_string(++n);
                dec_fc.push_back(dense(prefix, full->width, "decoder", layer_name(layers[j])));
                if (implicit_relu_) dec_fc.push_back(add(std::make_shared<ReluModule>(prefix + ".relu"), "decoder"));
                ++j;
                j = trailing(layers, j, prefix, "decoder", dec_fc);
            }
            dec_fc.push_back(add(std::make_shared<ReshapeModule>("dfc.unflatten", innermost), "decoder"));

            // Decoder blocks in execution order, innermost pair first.
            std::vector<std::vector<std::size_t>> exec_blocks;
            std::size_t dc_count = 0;
            for (std::size_t q = fc_end; q < layers.size(); ++q) {
                if (std::holds_alternative<layer::Deconv>(layers[q])) ++dc_count;
            }
            if (dc_count != plan.pair_count) {
                throw ShapeError("autoencoder has " + std::to_string(plan.pair_count) + " C layers but " +
                                 std::to_string(dc_count) + " DC layers");
            }
            std::size_t seen = 0;
            while (i < layers.size()) {
                const auto* deconv = std::get_if<layer::Deconv>(&layers[i]);
                if (!deconv) throw ShapeError("expected DC layer, got " + layer_name(layers[i]));
                const std::size_t pair = plan.pair_count - seen;  // 1-based, outermost = 1
                ++seen;
                const std::string prefix = "dec" + std::to_string(pair);
                const std::size_t out_channels = pair_inputs[pair - 1][0];
                std::vector<std::size_t> block;
                const std::size_t kernels = add_param(prefix + ".kernels", conv_kernel_shape(deconv->spec, out_channels),
                                                      Init::fan, conv_fan(deconv->spec, out_channels, false),
                                                      conv_fan(deconv->spec, out_channels, true));
                const std::size_t bias = add_param(prefix + ".bias", {out_channels}, Init::zero, 0, 0);
                block.push_back(add(std::make_shared<DeconvModule>(prefix + ".deconv", deconv->spec, out_channels,
                                                                    kernels, bias),
                                    "decoder", layer_name(layers[i])));
                if (shape_ != pair_inputs[pair - 1]) {
                    throw ShapeError("topology error at " + layer_name(layers[i]) + ": output " + to_string(shape_) +
                                     " does not invert the matching C layer input " +
                                     to_string(pair_inputs[pair - 1]));
                }
                const bool last = seen == plan.pair_count;
                if (implicit_relu_ && !last) block.push_back(add(std::make_shared<ReluModule>(prefix + ".relu"), "decoder"));
                ++i;
                i = trailing(layers, i, prefix, "decoder", block);
                exec_blocks.push_back(block);
            }
            dec_blocks.assign(exec_blocks.rbegin(), exec_blocks.rend());
            plan.output = shape_;
        }

        if (config_.topology != Topology::autoencoder) {
            // The head reads the code activation.
            shape_ = code_shape;
            previous_ = code_name;
            std::vector<std::size_t> widths;
            const bool literal_head = config_.head.layers.empty();
            const auto& head_layers = literal_head ? layers : config_.head.layers;
            const std::size_t start = literal_head ? fc_start : 0;
            const std::size_t stop = literal_head ? fc_end : head_layers.size();
            for (std::size_t q = start; q < stop; ++q) {
                const auto* full = std::get_if<layer::Full>(&head_layers[q]);
                if (full) widths.push_back(full->width);
                else if (!std::holds_alternative<layer::Relu>(head_layers[q]))
                    throw ShapeError("predictor head accepts only FC layers, got " + layer_name(head_layers[q]));
            }
            if (widths.empty()) throw ShapeError("predictor head has no FC layers");
            for (std::size_t q = 0; q < widths.size(); ++q) {
                const std::string prefix = "head" + std::to_string(q + 1);
                head.push_back(dense(prefix, widths[q], "head", "FC(" + std::to_string(widths[q]) + ")"));
                if (q + 1 < widths.size()) head.push_back(add(std::make_shared<ReluModule>(prefix + ".relu"), "head"));
            }
            plan.classes = widths.back();
            if (config_.topology == Topology::predictor) plan.output = shape_;
        }
    }

private:
    enum class Init { fan, zero, moving_average };

    static std::size_t conv_fan(const ConvSpec& spec, std::size_t channels, bool in) {
        const std::size_t window = spec.temporal_size * spec.spatial_size * spec.spatial_size;
        return (in ? channels : spec.filters) * window;
    }

    std::size_t add_param(const std::string& name, const Shape& shape, Init init, std::size_t fan_in,
                          std::size_t fan_out) {
        plan.parameter_count += volume(shape);
        last_params_ += volume(shape);
        if (!allocate_) return 0;
        Tensor value;
        switch (init) {
            case Init::fan:
                value = fill_random(shape, derive_seed(config_.seed, name), ScaledFanDist{fan_in, fan_out});
                break;
            case Init::zero:
                value = Tensor(shape);
                break;
            case Init::moving_average:
                value = moving_average_weights(shape[0], config_.mix_window);
                break;
        }
        return params.add(name, std::move(value));
    }

    std::size_t add(std::shared_ptr<const Module> module, const std::string& role, const std::string& desc = "") {
        Shape out;
        try {
            out = module->output_shape(shape_);
        } catch (const ShapeError& e) {
            throw ShapeError("topology error between " + previous_ + " and " + module->name() +
                             (desc.empty() ? "" : " " + desc) + ": " + e.what());
        }
        plan.layers.push_back({module->name(), role, out, last_params_});
        last_params_ = 0;
        shape_ = out;
        previous_ = module->name();
        modules.push_back(std::move(module));
        return modules.size() - 1;
    }

    std::size_t dense(const std::string& prefix, std::size_t width, const std::string& role, const std::string& desc) {
        const std::size_t in = volume(shape_);
        if (shape_.size() != 1) {
            throw ShapeError("topology error between " + previous_ + " and " + prefix + ": FC expects a flat input");
        }
        const std::size_t w = add_param(prefix + ".weights", {width, in}, Init::fan, in, width);
        const std::size_t b = add_param(prefix + ".bias", {width}, Init::zero, 0, 0);
        return add(std::make_shared<DenseModule>(prefix + ".fc", width, w, b), role, desc);
    }

    std::size_t trailing(const std::vector<LayerDesc>& layers, std::size_t i, const std::string& prefix,
                         const std::string& role, std::vector<std::size_t>& block) {
        std::size_t norms = 0;
        while (i < layers.size()) {
            if (const auto* n = std::get_if<layer::Norm>(&layers[i])) {
                block.push_back(add(std::make_shared<LrnModule>(prefix + ".norm" + (norms ? std::to_string(norms) : ""),
                                                                n->params),
                                    role, "N"));
                ++norms;
            } else if (std::holds_alternative<layer::Relu>(layers[i])) {
                block.push_back(add(std::make_shared<ReluModule>(prefix + ".relu"), role));
            } else {
                break;
            }
            ++i;
        }
        return i;
    }

    const NetworkConfig& config_;
    bool allocate_;
    bool implicit_relu_ = true;
    Shape shape_;
    std::string previous_;
    std::size_t last_params_ = 0;
};

}  // namespace

NetworkPlan plan_network(const NetworkConfig& config) {
    Builder b(config, false);
    std::vector<std::size_t> front, code, dec_fc, head;
    std::vector<std::vector<std::size_t>> enc, dec;
    b.build(front, enc, code, dec_fc, dec, head);
    return b.plan;
}

Network build_network(const NetworkConfig& config) {
    Builder b(config, true);
    Network net;
    net.config_ = config;
    b.build(net.front_, net.enc_blocks_, net.code_, net.dec_fc_, net.dec_blocks_, net.head_);
    net.plan_ = std::move(b.plan);
    net.params_ = std::move(b.params);
    net.modules_ = std::move(b.modules);
    return net;
}

void Network::run(const ModuleList& list, Tensor x, std::vector<Step>& steps) const {
    for (std::size_t id : list) {
        Tensor y = modules_[id]->forward(params_, x);
        steps.push_back({id, std::move(x), y});
        x = std::move(y);
    }
}

Tensor Network::run_back(const std::vector<Step>& steps, Tensor grad, Gradients& grads, bool need_first_input) const {
    for (std::size_t k = steps.size(); k-- > 0;) {
        const Step& s = steps[k];
        const bool need = k > 0 || need_first_input;
        grad = modules_[s.module]->backward(params_, s.input, s.output, grad, grads, need);
        if (!need) return {};
    }
    return grad;
}

ForwardPass Network::forward(const Tensor& clip, std::optional<std::size_t> label, LossWeights weights,
                             std::size_t depth) const {
    if (clip.shape() != config_.input) {
        throw ShapeError("clip shape " + to_string(clip.shape()) + " does not match network input " +
                         to_string(config_.input));
    }
    const std::size_t full = pair_count();
    if (depth == 0) depth = full;
    if (depth > full) throw ConfigError("depth exceeds the number of conv/deconv pairs");
    if (depth < full && !has_decoder()) throw ConfigError("partial depth requires a decoder");

    ForwardPass pass;
    pass.depth = depth;
    pass.label = label;
    pass.weights = weights;

    Tensor x = clip;
    run(front_, x, pass.trunk);
    pass.target = pass.trunk.empty() ? clip : pass.trunk.back().output;
    x = pass.target;
    for (std::size_t k = 0; k < depth; ++k) {
        run(enc_blocks_[k], x, pass.trunk);
        x = pass.trunk.back().output;
    }
    if (depth == full) {
        run(code_, x, pass.trunk);
        x = pass.trunk.back().output;
    }
    const Tensor& trunk_out = x;

    if (has_decoder()) {
        ModuleList dec;
        if (depth == full) dec = dec_fc_;
        for (std::size_t k = depth; k-- > 0;) dec.insert(dec.end(), dec_blocks_[k].begin(), dec_blocks_[k].end());
        run(dec, trunk_out, pass.decoder);
        pass.reconstruction = pass.decoder.back().output;
        pass.losses.recon = euclidean_recon_loss(pass.target, pass.reconstruction);
        pass.losses.has_recon = true;
        pass.losses.total += weights.recon * pass.losses.recon;
    }
    if (has_head() && depth == full) {
        run(head_, trunk_out, pass.head);
        pass.logits = pass.head.back().output;
        if (label) {
            SoftmaxResult sm = softmax_cross_entropy(pass.logits, *label);
            pass.losses.softmax = sm.loss;
            pass.losses.has_softmax = true;
            pass.losses.total += weights.softmax * sm.loss;
            pass.probs = std::move(sm.probs);
        } else {
            pass.probs = softmax(pass.logits);
        }
    }
    return pass;
}

void Network::backward(const ForwardPass& pass, Gradients& grads) const {
    if (grads.size() != params_.size()) throw ConfigError("gradient buffer does not match parameter store");
    Tensor g_trunk;
    Tensor g_target;
    if (pass.losses.has_recon && pass.weights.recon != 0.0) {
        EuclideanGrads eg = euclidean_recon_loss_backward(pass.target, pass.reconstruction);
        eg.output *= pass.weights.recon;
        eg.target *= pass.weights.recon;
        g_trunk = run_back(pass.decoder, std::move(eg.output), grads, true);
        g_target = std::move(eg.target);
    }
    if (pass.losses.has_softmax && pass.weights.softmax != 0.0) {
        SoftmaxResult sm{pass.losses.softmax, pass.probs};
        Tensor gl = softmax_cross_entropy_backward(sm, *pass.label);
        gl *= pass.weights.softmax;
        Tensor gh = run_back(pass.head, std::move(gl), grads, true);
        if (g_trunk.empty()) g_trunk = std::move(gh);
        else g_trunk += gh;
    }
    if (g_trunk.empty()) return;

    const std::size_t n_front = front_.size();
    const bool front_trainable = std::any_of(front_.begin(), front_.end(),
                                             [&](std::size_t id) { return !modules_[id]->param_ids().empty(); });
    std::vector<Step> front_steps(pass.trunk.begin(), pass.trunk.begin() + static_cast<long>(n_front));
    std::vector<Step> rest(pass.trunk.begin() + static_cast<long>(n_front), pass.trunk.end());
    Tensor g_front_out = run_back(rest, std::move(g_trunk), grads, front_trainable);
    if (front_trainable) {
        if (!g_target.empty()) g_front_out += g_target;
        run_back(front_steps, std::move(g_front_out), grads, false);
    }
}

Tensor Network::predict(const Tensor& clip) const {
    if (!has_head()) throw ConfigError("predict requires a predictor or semisupervised network");
    return forward(clip).probs;
}

std::optional<IllumParams> Network::illum_params() const {
    for (std::size_t id : front_) {
        if (const auto* m = dynamic_cast<const IllumModule*>(modules_[id].get())) return m->params(params_);
    }
    return std::nullopt;
}

std::vector<std::size_t> Network::collect(const std::vector<ModuleList>& lists) const {
    std::vector<std::size_t> ids;
    for (const auto& list : lists) {
        for (std::size_t m : list) {
            for (std::size_t p : modules_[m]->param_ids()) ids.push_back(p);
        }
    }
    return ids;
}

std::vector<std::size_t> Network::stage_params(std::size_t stage) const {
    if (stage < 1 || stage > pair_count()) throw ConfigError("stage out of range");
    std::vector<ModuleList> lists;
    if (stage == 1) lists.push_back(front_);
    lists.push_back(enc_blocks_[stage - 1]);
    if (stage == pair_count()) {
        lists.push_back(code_);
        lists.push_back(dec_fc_);
    }
    if (has_decoder()) lists.push_back(dec_blocks_[stage - 1]);
    return collect(lists);
}

std::vector<std::size_t> Network::head_params() const { return collect({head_}); }

std::vector<std::size_t> Network::decoder_params() const {
    std::vector<ModuleList> lists{dec_fc_};
    lists.insert(lists.end(), dec_blocks_.begin(), dec_blocks_.end());
    return collect(lists);
}

std::vector<std::size_t> Network::encoder_params() const {
    std::vector<ModuleList> lists(enc_blocks_.begin(), enc_blocks_.end());
    lists.push_back(code_);
    return collect(lists);
}

std::vector<std::size_t> Network::front_params() const { return collect({front_}); }

std::size_t Network::copy_matching_params(const Network& other) {
    std::size_t copied = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto j = other.params_.find(params_.name(i));
        if (j && other.params_.value(*j).shape() == params_.value(i).shape()) {
            params_.value(i) = other.params_.value(*j);
            ++copied;
        }
    }
    return copied;
}

}  // namespace stnet
