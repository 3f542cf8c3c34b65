#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stnet/model/network.hpp"

namespace stnet {

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 22;
    std::size_t max_epochs = 30;
    std::uint64_t seed = 1;
    /// Multiplier applied every third of max_epochs; 1 disables the decay.
    double decay = 0.1;

    void validate() const;
    friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

/// Step decay: x`decay` every third of max_epochs (epoch is 0-based).
double scheduled_rate(const SgdConfig& sgd, std::size_t epoch);

/// Weights of the joint loss total = beta_pred * softmax + alpha_recon * recon.
struct LossSchedule {
    double alpha_recon = 1.0;
    double beta_pred = 1.0;
    double alpha_decay = 1.0;
    double beta_calibration_ratio = 10.0;
    /// When false beta_pred is used as given.
    bool calibrate = true;

    void validate() const;
    friend bool operator==(const LossSchedule&, const LossSchedule&) = default;
};

/// One network input [1,frames,h,w] with an optional class label.
struct Example {
    Tensor input;
    std::optional<std::size_t> label;
};

/// Momentum SGD over a subset of a parameter store: v = mu*v - lr*g; w += v.
class SgdOptimizer {
public:
    SgdOptimizer() = default;
    SgdOptimizer(const ParamStore& params, double momentum);

    void set_trainable(const std::vector<std::size_t>& ids);
    const std::vector<bool>& trainable() const noexcept { return trainable_; }
    void step(ParamStore& params, const Gradients& grads, double learning_rate);

    std::vector<Tensor>& velocities() noexcept { return velocity_; }
    const std::vector<Tensor>& velocities() const noexcept { return velocity_; }

private:
    double momentum_ = 0.0;
    std::vector<bool> trainable_;
    std::vector<Tensor> velocity_;
};

/// Plain reconstruction training of the (possibly partial) autoencoder.
/// Returns the mean per-example loss of every epoch.
std::vector<double> train_autoencoder(Network& net, const std::vector<Example>& data, const SgdConfig& sgd,
                                      std::size_t depth = 0);

struct PretrainConfig {
    SgdConfig sgd;
    /// Epoch cap for the frozen phase of a stage.
    std::size_t stage_epochs = 40;
    std::size_t finetune_epochs = 10;
    double convergence_tolerance = 1e-3;
    std::size_t convergence_window = 5;
    bool freeze_mix = false;

    void validate() const;
};

struct PretrainPhase {
    std::vector<std::string> trainable;
    std::vector<std::string> frozen;
    std::vector<double> losses;
    std::uint64_t frozen_before = 0;
    std::uint64_t frozen_after = 0;
    bool converged = false;
};

struct PretrainStage {
    std::size_t stage = 0;
    PretrainPhase frozen_phase;
    PretrainPhase finetune;
};

struct PretrainLog {
    std::vector<PretrainStage> stages;
};

/// True once the relative change of the loss across the trailing window is
/// below tolerance.
bool loss_converged(const std::vector<double>& losses, std::size_t window, double tolerance);

/// Outermost-in layer-wise pretraining. Each stage first trains its new
/// pair with the earlier pairs frozen until the loss converges, then
/// fine-tunes every parameter present. `first_stage` resumes a partly
/// pretrained network.
PretrainLog pretrain_layerwise(Network& net, const std::vector<Example>& data, const PretrainConfig& config,
                               std::size_t first_stage = 1);

void write_stage_log_csv(const std::string& path, const PretrainLog& log);

struct HistoryRow {
    std::size_t epoch = 0;
    double l_recon = 0.0;
    double l_softmax = 0.0;
    double l_total = 0.0;
    double val_accuracy = 0.0;

    friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

/// Everything needed to continue joint training where it stopped.
struct TrainState {
    std::size_t next_epoch = 0;
    double alpha_recon = 1.0;
    double beta_pred = 1.0;
    bool calibrated = false;
    std::vector<Tensor> velocities;
    std::vector<HistoryRow> history;

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct Calibration {
    double l_recon = 0.0;
    double l_softmax = 0.0;
    double beta_pred = 0.0;
};

/// Mean recon and softmax losses over the labeled examples of a batch and
/// the resulting beta = ratio * alpha * L_recon / L_softmax.
Calibration calibrate_beta(const Network& net, const std::vector<Example>& batch, const LossSchedule& schedule);

struct SemisupOptions {
    /// Unlabeled inputs following each labeled one in the interleave.
    std::size_t unlabeled_per_labeled = 1;
    bool freeze_mix = false;
    std::vector<Example> validation;
};

/// Epoch order: groups of one labeled then `ratio` unlabeled examples, both
/// streams shuffled per epoch and cycled until the longer one is exhausted.
std::vector<const Example*> interleave(const std::vector<Example>& labeled, const std::vector<Example>& unlabeled,
                                       std::size_t ratio, std::uint64_t seed);

/// Joint training with the weighted loss. Also the supervised baseline when
/// the network has no decoder or unlabeled is empty. Continues from `state`
/// when its next_epoch is nonzero and updates it in place.
std::vector<HistoryRow> train_semisupervised(Network& net, const std::vector<Example>& labeled,
                                             const std::vector<Example>& unlabeled, const LossSchedule& schedule,
                                             const SgdConfig& sgd, const SemisupOptions& options = {},
                                             TrainState* state = nullptr);

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history);
std::string history_csv(const std::vector<HistoryRow>& history);

struct Evaluation {
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
};

Evaluation evaluate(const Network& net, const std::vector<Example>& data);

/// Per-pixel RMSE of the reconstruction against its target, over all examples.
double reconstruction_rmse(const Network& net, const std::vector<Example>& data);

}  // namespace stnet
