#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stnet/illum/illum.hpp"
#include "stnet/layers/arch.hpp"
#include "stnet/model/modules.hpp"
#include "stnet/model/params.hpp"

namespace stnet {

enum class Topology { autoencoder, predictor, semisupervised };
enum class FrontEnd { none, lrn, illum };

std::string to_string(Topology t);
std::string to_string(FrontEnd f);
Topology parse_topology(const std::string& text);
FrontEnd parse_front_end(const std::string& text);

/// Named size configuration: input clip shape, autoencoder and head
/// shorthand, stride sidecar.
struct Preset {
    std::string name;
    std::size_t side = 33;
    std::size_t frames = 9;
    std::string autoencoder;
    std::string head;
    StrideTable strides;
};

/// 145x145x9 input, 4096-wide code.
Preset paper_preset();
/// 33x33x9 input, filters /8, code 256, head widths /16.
Preset desk_preset();
/// 9x9x3 input with two-filter convolutions; for gradient checks.
Preset tiny_preset();
Preset preset_by_name(const std::string& name);

struct NetworkConfig {
    std::string preset = "desk";
    Shape input{1, 9, 33, 33};
    ArchSpec autoencoder;
    ArchSpec head;
    Topology topology = Topology::semisupervised;
    FrontEnd front_end = FrontEnd::none;
    /// Transfer-function constants; the mix is initialized from mix_window.
    double illum_alpha = 1.0;
    double illum_beta = 1e-6;
    double illum_gamma = 1.0;
    double illum_delta = 0.0;
    std::size_t mix_window = 3;
    LrnParams front_lrn{};
    std::uint64_t seed = 1;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

NetworkConfig make_config(const Preset& preset, Topology topology, FrontEnd front_end = FrontEnd::none,
                          std::uint64_t seed = 1);

struct LayerRecord {
    std::string name;
    std::string role;
    Shape output;
    std::size_t parameters = 0;
};

/// Shape inference without allocating parameters.
struct NetworkPlan {
    std::vector<LayerRecord> layers;
    std::size_t code_width = 0;
    std::size_t pair_count = 0;
    std::size_t classes = 0;
    std::size_t parameter_count = 0;
    Shape output;  ///< reconstruction shape (autoencoder, semisupervised) or logits
};

NetworkPlan plan_network(const NetworkConfig& config);

struct LossWeights {
    double recon = 1.0;
    double softmax = 1.0;
};

struct Losses {
    double recon = 0.0;
    double softmax = 0.0;
    double total = 0.0;
    bool has_recon = false;
    bool has_softmax = false;
};

struct Step {
    std::size_t module;
    Tensor input;
    Tensor output;
};

/// Everything backward needs: activations of each executed module.
struct ForwardPass {
    Tensor target;  ///< reconstruction target (input after the front-end)
    Tensor reconstruction;
    Tensor logits;
    Tensor probs;
    Losses losses;
    std::optional<std::size_t> label;
    LossWeights weights;
    std::size_t depth = 0;
    std::vector<Step> trunk;
    std::vector<Step> decoder;
    std::vector<Step> head;
};

/// A built network: immutable module graph plus one parameter store shared
/// by the reconstruction and prediction branches.
class Network {
public:
    const NetworkConfig& config() const noexcept { return config_; }
    Topology topology() const noexcept { return config_.topology; }
    const NetworkPlan& plan() const noexcept { return plan_; }
    std::size_t code_width() const noexcept { return plan_.code_width; }
    std::size_t pair_count() const noexcept { return plan_.pair_count; }
    std::size_t num_classes() const noexcept { return plan_.classes; }
    bool has_decoder() const noexcept { return topology() != Topology::predictor; }
    bool has_head() const noexcept { return topology() != Topology::autoencoder; }

    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }

    /// depth < pair_count runs the intermediate autoencoder made of the
    /// outermost `depth` conv/deconv pairs; 0 means the full network.
    ForwardPass forward(const Tensor& clip, std::optional<std::size_t> label = std::nullopt,
                        LossWeights weights = {}, std::size_t depth = 0) const;
    /// Adds d(total loss)/d(params) to grads.
    void backward(const ForwardPass& pass, Gradients& grads) const;
    /// Softmax over the head's logits.
    Tensor predict(const Tensor& clip) const;
    /// Current front-end constants and mixer, when the front-end is illum.
    std::optional<IllumParams> illum_params() const;

    /// Parameters first trained at stage `stage` (1-based) of layer-wise pretraining.
    std::vector<std::size_t> stage_params(std::size_t stage) const;
    std::vector<std::size_t> head_params() const;
    std::vector<std::size_t> decoder_params() const;
    std::vector<std::size_t> encoder_params() const;
    std::vector<std::size_t> front_params() const;

    /// Copies every parameter whose name and shape match; returns the count.
    std::size_t copy_matching_params(const Network& other);

private:
    friend Network build_network(const NetworkConfig& config);

    using ModuleList = std::vector<std::size_t>;
    void run(const ModuleList& list, Tensor x, std::vector<Step>& steps) const;
    Tensor run_back(const std::vector<Step>& steps, Tensor grad, Gradients& grads, bool need_first_input) const;
    std::vector<std::size_t> collect(const std::vector<ModuleList>& lists) const;

    NetworkConfig config_;
    NetworkPlan plan_;
    ParamStore params_;
    std::vector<std::shared_ptr<const Module>> modules_;
    ModuleList front_;
    std::vector<ModuleList> enc_blocks_;  ///< outermost first
    ModuleList code_;
    ModuleList dec_fc_;
    std::vector<ModuleList> dec_blocks_;  ///< indexed by pair, outermost first
    ModuleList head_;
};

/// Builds and initializes (scaled-fan weights, zero biases, moving-average
/// frame mixer). Throws ShapeError naming the failing layer boundary.
Network build_network(const NetworkConfig& config);

}  // namespace stnet
