#include "stnet/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "stnet/error.hpp"
#include "stnet/io.hpp"
#include "stnet/rng.hpp"

namespace stnet {

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must be in (0,1]");
}

double scheduled_rate(const SgdConfig& sgd, std::size_t epoch) {
    const std::size_t period = std::max<std::size_t>(1, sgd.max_epochs / 3);
    return sgd.learning_rate * std::pow(sgd.decay, static_cast<double>(epoch / period));
}

void LossSchedule::validate() const {
    if (!(alpha_recon >= 0.0)) throw ConfigError("alpha_recon must be >= 0");
    if (!(beta_pred >= 0.0)) throw ConfigError("beta_pred must be >= 0");
    if (!(alpha_decay > 0.0 && alpha_decay <= 1.0)) throw ConfigError("alpha_decay must be in (0,1]");
    if (!(beta_calibration_ratio > 0.0)) throw ConfigError("beta_calibration_ratio must be > 0");
}

void PretrainConfig::validate() const {
    sgd.validate();
    if (stage_epochs < 1) throw ConfigError("stage_epochs must be >= 1");
    if (convergence_window < 1) throw ConfigError("convergence_window must be >= 1");
    if (!(convergence_tolerance > 0.0)) throw ConfigError("convergence_tolerance must be > 0");
}

SgdOptimizer::SgdOptimizer(const ParamStore& params, double momentum)
    : momentum_(momentum), trainable_(params.size(), true), velocity_(params.zero_grads()) {}

void SgdOptimizer::set_trainable(const std::vector<std::size_t>& ids) {
    std::fill(trainable_.begin(), trainable_.end(), false);
    for (std::size_t id : ids) trainable_.at(id) = true;
}

void SgdOptimizer::step(ParamStore& params, const Gradients& grads, double learning_rate) {
    if (grads.size() != params.size() || velocity_.size() != params.size()) {
        throw ConfigError("optimizer state does not match parameter store");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable_[i]) continue;
        Tensor& v = velocity_[i];
        v *= momentum_;
        v.axpy(-learning_rate, grads[i]);
        params.value(i) += v;
    }
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle(idx, rng);
    return idx;
}

std::vector<std::size_t> without(const std::vector<std::size_t>& ids, const std::vector<std::size_t>& drop) {
    std::vector<std::size_t> out;
    for (std::size_t id : ids) {
        if (std::find(drop.begin(), drop.end(), id) == drop.end()) out.push_back(id);
    }
    return out;
}

std::vector<std::string> names_of(const ParamStore& params, const std::vector<std::size_t>& ids) {
    std::vector<std::string> names;
    for (std::size_t id : ids) names.push_back(params.name(id));
    return names;
}

void scale_grads(Gradients& grads, double s) {
    for (auto& g : grads) g *= s;
}

/// One reconstruction epoch; returns the mean per-example loss.
double autoencoder_epoch(Network& net, const std::vector<Example>& data, SgdOptimizer& opt, double lr,
                         std::size_t batch_size, std::uint64_t seed, std::size_t depth, int stage, int epoch) {
    const auto order = shuffled_indices(data.size(), seed);
    double total = 0.0;
    Gradients grads = net.params().zero_grads();
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        for (auto& g : grads) g.fill(0.0);
        for (std::size_t k = start; k < stop; ++k) {
            ForwardPass pass = net.forward(data[order[k]].input, std::nullopt, LossWeights{1.0, 0.0}, depth);
            if (!std::isfinite(pass.losses.total)) throw TrainingError("reconstruction loss diverged", stage, epoch);
            total += pass.losses.total;
            net.backward(pass, grads);
        }
        scale_grads(grads, 1.0 / static_cast<double>(stop - start));
        opt.step(net.params(), grads, lr);
    }
    return total / static_cast<double>(data.size());
}

std::vector<std::size_t> present_params(const Network& net, std::size_t stage) {
    std::vector<std::size_t> ids;
    for (std::size_t s = 1; s <= stage; ++s) {
        auto more = net.stage_params(s);
        ids.insert(ids.end(), more.begin(), more.end());
    }
    return ids;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::vector<double> train_autoencoder(Network& net, const std::vector<Example>& data, const SgdConfig& sgd,
                                      std::size_t depth) {
    sgd.validate();
    if (data.empty()) throw ConfigError("training data is empty");
    if (!net.has_decoder()) throw ConfigError("reconstruction training needs an autoencoder");
    SgdOptimizer opt(net.params(), sgd.momentum);
    std::vector<double> losses;
    for (std::size_t e = 0; e < sgd.max_epochs; ++e) {
        losses.push_back(autoencoder_epoch(net, data, opt, scheduled_rate(sgd, e), sgd.batch_size,
                                           derive_seed(sgd.seed, e), depth, 0, static_cast<int>(e)));
    }
    return losses;
}

bool loss_converged(const std::vector<double>& losses, std::size_t window, double tolerance) {
    if (losses.size() <= window) return false;
    const double now = losses.back();
    const double then = losses[losses.size() - 1 - window];
    const double scale = std::max(std::abs(then), std::numeric_limits<double>::min());
    return std::abs(now - then) / scale < tolerance;
}

PretrainLog pretrain_layerwise(Network& net, const std::vector<Example>& data, const PretrainConfig& config,
                               std::size_t first_stage) {
    config.validate();
    if (data.empty()) throw ConfigError("pretraining data is empty");
    if (net.topology() != Topology::autoencoder) throw ConfigError("layer-wise pretraining needs an autoencoder");
    const std::size_t stages = net.pair_count();
    if (first_stage < 1 || first_stage > stages + 1) throw ConfigError("first_stage out of range");
    const std::vector<std::size_t> mix = config.freeze_mix ? net.front_params() : std::vector<std::size_t>{};

    PretrainLog log;
    for (std::size_t s = first_stage; s <= stages; ++s) {
        const std::size_t depth = s;
        PretrainStage record;
        record.stage = s;
        const auto present = without(present_params(net, s), mix);
        const auto fresh = without(net.stage_params(s), mix);
        const auto frozen = without(present_params(net, s), fresh);
        const std::uint64_t stage_seed = derive_seed(config.sgd.seed, "stage" + std::to_string(s));

        SgdConfig phase_sgd = config.sgd;
        phase_sgd.max_epochs = config.stage_epochs;
        SgdOptimizer opt(net.params(), config.sgd.momentum);
        opt.set_trainable(fresh);
        PretrainPhase& fp = record.frozen_phase;
        fp.trainable = names_of(net.params(), fresh);
        fp.frozen = names_of(net.params(), frozen);
        fp.frozen_before = net.params().fingerprint(frozen);
        for (std::size_t e = 0; e < config.stage_epochs; ++e) {
            fp.losses.push_back(autoencoder_epoch(net, data, opt, scheduled_rate(phase_sgd, e), config.sgd.batch_size,
                                                  derive_seed(stage_seed, e), depth, static_cast<int>(s),
                                                  static_cast<int>(e)));
            if (loss_converged(fp.losses, config.convergence_window, config.convergence_tolerance)) {
                fp.converged = true;
                break;
            }
        }
        fp.frozen_after = net.params().fingerprint(frozen);

        PretrainPhase& ft = record.finetune;
        phase_sgd.max_epochs = std::max<std::size_t>(1, config.finetune_epochs);
        SgdOptimizer tune(net.params(), config.sgd.momentum);
        tune.set_trainable(present);
        ft.trainable = names_of(net.params(), present);
        ft.frozen = names_of(net.params(), mix);
        ft.frozen_before = net.params().fingerprint(mix);
        const std::uint64_t tune_seed = derive_seed(stage_seed, "finetune");
        for (std::size_t e = 0; e < config.finetune_epochs; ++e) {
            ft.losses.push_back(autoencoder_epoch(net, data, tune, scheduled_rate(phase_sgd, e), config.sgd.batch_size,
                                                  derive_seed(tune_seed, e), depth, static_cast<int>(s),
                                                  static_cast<int>(fp.losses.size() + e)));
        }
        ft.frozen_after = net.params().fingerprint(mix);
        log.stages.push_back(std::move(record));
    }
    return log;
}

void write_stage_log_csv(const std::string& path, const PretrainLog& log) {
    std::string out = "stage,phase,epoch,loss,trainable,frozen,frozen_unchanged\n";
    for (const auto& st : log.stages) {
        auto emit = [&](const char* phase, const PretrainPhase& p) {
            std::string trainable, frozen;
            for (const auto& n : p.trainable) trainable += (trainable.empty() ? "" : " ") + n;
            for (const auto& n : p.frozen) frozen += (frozen.empty() ? "" : " ") + n;
            const char* same = p.frozen_before == p.frozen_after ? "1" : "0";
            for (std::size_t e = 0; e < p.losses.size(); ++e) {
                out += std::to_string(st.stage) + "," + phase + "," + std::to_string(e) + "," + fmt(p.losses[e]) + "," +
                       trainable + "," + frozen + "," + same + "\n";
            }
        };
        emit("frozen", st.frozen_phase);
        emit("finetune", st.finetune);
    }
    write_file_atomic(path, out);
}

Calibration calibrate_beta(const Network& net, const std::vector<Example>& batch, const LossSchedule& schedule) {
    Calibration c;
    std::size_t n = 0;
    for (const auto& ex : batch) {
        if (!ex.label) continue;
        ForwardPass pass = net.forward(ex.input, ex.label);
        c.l_recon += pass.losses.recon;
        c.l_softmax += pass.losses.softmax;
        ++n;
    }
    if (n == 0) throw ConfigError("calibration batch has no labeled examples");
    c.l_recon /= static_cast<double>(n);
    c.l_softmax /= static_cast<double>(n);
    if (!(c.l_softmax > 0.0) || !std::isfinite(c.l_recon)) throw NumericError("cannot calibrate beta: degenerate losses");
    c.beta_pred = schedule.beta_calibration_ratio * schedule.alpha_recon * c.l_recon / c.l_softmax;
    return c;
}

std::vector<const Example*> interleave(const std::vector<Example>& labeled, const std::vector<Example>& unlabeled,
                                       std::size_t ratio, std::uint64_t seed) {
    const auto lo = shuffled_indices(labeled.size(), derive_seed(seed, "labeled"));
    const auto uo = shuffled_indices(unlabeled.size(), derive_seed(seed, "unlabeled"));
    std::vector<const Example*> order;
    if (labeled.empty()) {
        for (std::size_t i : uo) order.push_back(&unlabeled[i]);
        return order;
    }
    const bool mix = ratio > 0 && !unlabeled.empty();
    const std::size_t groups = mix ? std::max(labeled.size(), (unlabeled.size() + ratio - 1) / ratio) : labeled.size();
    for (std::size_t g = 0; g < groups; ++g) {
        order.push_back(&labeled[lo[g % lo.size()]]);
        if (!mix) continue;
        for (std::size_t k = 0; k < ratio; ++k) order.push_back(&unlabeled[uo[(g * ratio + k) % uo.size()]]);
    }
    return order;
}

std::vector<HistoryRow> train_semisupervised(Network& net, const std::vector<Example>& labeled,
                                             const std::vector<Example>& unlabeled, const LossSchedule& schedule,
                                             const SgdConfig& sgd, const SemisupOptions& options, TrainState* state) {
    sgd.validate();
    schedule.validate();
    if (labeled.empty()) throw ConfigError("joint training needs at least one labeled example");
    if (!net.has_head()) throw ConfigError("joint training needs a prediction head");
    for (const auto& ex : labeled) {
        if (!ex.label) throw ConfigError("labeled stream contains an unlabeled example");
    }

    TrainState local;
    TrainState& st = state ? *state : local;
    SgdOptimizer opt(net.params(), sgd.momentum);
    if (st.next_epoch == 0) {
        st.beta_pred = schedule.beta_pred;
        st.calibrated = false;
        st.history.clear();
    } else if (st.velocities.size() == net.params().size()) {
        opt.velocities() = st.velocities;
    }
    std::vector<std::size_t> all(net.params().size());
    std::iota(all.begin(), all.end(), 0);
    opt.set_trainable(options.freeze_mix ? without(all, net.front_params()) : all);

    const std::vector<Example> none;
    const std::vector<Example>& extra = net.has_decoder() ? unlabeled : none;
    Gradients grads = net.params().zero_grads();
    for (std::size_t e = st.next_epoch; e < sgd.max_epochs; ++e) {
        const double alpha = schedule.alpha_recon * std::pow(schedule.alpha_decay, static_cast<double>(e));
        st.alpha_recon = alpha;
        const auto order = interleave(labeled, extra, options.unlabeled_per_labeled, derive_seed(sgd.seed, e));
        const double lr = scheduled_rate(sgd, e);
        double sum_recon = 0.0, sum_soft = 0.0, sum_total = 0.0;
        std::size_t n_recon = 0, n_soft = 0;
        for (std::size_t start = 0; start < order.size(); start += sgd.batch_size) {
            const std::size_t stop = std::min(order.size(), start + sgd.batch_size);
            if (!st.calibrated) {
                if (schedule.calibrate && net.has_decoder()) {
                    std::vector<Example> batch;
                    for (std::size_t k = start; k < stop; ++k) batch.push_back(*order[k]);
                    LossSchedule current = schedule;
                    current.alpha_recon = alpha;
                    st.beta_pred = calibrate_beta(net, batch, current).beta_pred;
                }
                st.calibrated = true;
            }
            for (auto& g : grads) g.fill(0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const Example& ex = *order[k];
                ForwardPass pass = net.forward(ex.input, ex.label, LossWeights{alpha, st.beta_pred});
                if (!std::isfinite(pass.losses.total)) {
                    throw TrainingError("joint loss diverged", 0, static_cast<int>(e));
                }
                if (pass.losses.has_recon) {
                    sum_recon += pass.losses.recon;
                    ++n_recon;
                }
                if (pass.losses.has_softmax) {
                    sum_soft += pass.losses.softmax;
                    ++n_soft;
                }
                sum_total += pass.losses.total;
                net.backward(pass, grads);
            }
            scale_grads(grads, 1.0 / static_cast<double>(stop - start));
            opt.step(net.params(), grads, lr);
        }
        HistoryRow row;
        row.epoch = e;
        row.l_recon = n_recon ? sum_recon / static_cast<double>(n_recon) : 0.0;
        row.l_softmax = n_soft ? sum_soft / static_cast<double>(n_soft) : 0.0;
        row.l_total = sum_total / static_cast<double>(order.size());
        row.val_accuracy = options.validation.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                      : evaluate(net, options.validation).accuracy;
        st.history.push_back(row);
        st.next_epoch = e + 1;
        st.velocities = opt.velocities();
    }
    return st.history;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
    std::string out = "epoch,l_recon,l_softmax,l_total,val_accuracy\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + "," + fmt(r.l_recon) + "," + fmt(r.l_softmax) + "," + fmt(r.l_total) + "," +
               fmt(r.val_accuracy) + "\n";
    }
    return out;
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history) {
    write_file_atomic(path, history_csv(history));
}

Evaluation evaluate(const Network& net, const std::vector<Example>& data) {
    if (data.empty()) throw ConfigError("evaluation set is empty");
    const std::size_t k = net.num_classes();
    Evaluation ev;
    ev.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (const auto& ex : data) {
        if (!ex.label) throw ConfigError("evaluation set contains an unlabeled example");
        if (*ex.label >= k) throw ShapeError("label " + std::to_string(*ex.label) + " out of range");
        const Tensor probs = net.predict(ex.input);
        const auto& p = probs.values();
        const std::size_t guess =
            static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        ++ev.confusion[*ex.label][guess];
        if (guess == *ex.label) ++correct;
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return ev;
}

double reconstruction_rmse(const Network& net, const std::vector<Example>& data) {
    if (data.empty()) throw ConfigError("evaluation set is empty");
    if (!net.has_decoder()) throw ConfigError("network has no reconstruction branch");
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& ex : data) {
        ForwardPass pass = net.forward(ex.input);
        for (std::size_t i = 0; i < pass.target.size(); ++i) {
            const double d = pass.reconstruction[i] - pass.target[i];
            sq += d * d;
        }
        n += pass.target.size();
    }
    return std::sqrt(sq / static_cast<double>(n));
}

}  // namespace stnet
