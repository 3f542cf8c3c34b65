#include "stnet/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include "stnet/data/clip.hpp"
#include "stnet/data/manifest.hpp"
#include "stnet/data/strip.hpp"
#include "stnet/error.hpp"
#include "stnet/io.hpp"
#include "stnet/model/checkpoint.hpp"
#include "stnet/model/verify.hpp"
#include "stnet/rng.hpp"

namespace fs = std::filesystem;

namespace stnet::cli {
namespace {

constexpr const char* kConfigEcho = "config.ini";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string base_dir_of(const std::string& manifest_path) {
    return fs::path(manifest_path).parent_path().string();
}

NetworkConfig network_config(const NetworkOptions& o, Topology topology, std::uint64_t seed) {
    NetworkConfig c = make_config(preset_by_name(o.preset), topology, parse_front_end(o.front_end), seed);
    c.illum_alpha = o.illum_alpha;
    c.illum_beta = o.illum_beta;
    c.illum_gamma = o.illum_gamma;
    c.illum_delta = o.illum_delta;
    c.mix_window = o.mix_window;
    // Shape and constant checks happen here, before anything is written.
    plan_network(c);
    if (c.front_end == FrontEnd::illum) {
        IllumParams p{c.illum_alpha, c.illum_beta, c.illum_gamma, c.illum_delta,
                      moving_average_weights(c.input[1], c.mix_window)};
        validate(p, c.input[1]);
    }
    return c;
}

std::vector<Example> examples_of(const std::vector<ManifestRecord>& records, const std::string& base,
                                 bool keep_labels = true) {
    std::vector<Example> out = to_examples(load_clips(records, base));
    if (!keep_labels) {
        for (auto& ex : out) ex.label.reset();
    }
    return out;
}

std::vector<ManifestRecord> labeled_only(const std::vector<ManifestRecord>& records) {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.label) out.push_back(r);
    }
    return out;
}

std::vector<ManifestRecord> unlabeled_only(const std::vector<ManifestRecord>& records) {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (!r.label) out.push_back(r);
    }
    return out;
}

void validate_split(const std::string& split) {
    require(split == kTrain || split == kTest || split == kValidation, "unknown split '" + split + "'");
}

double recon_error(const Network& net, const std::vector<Example>& data) {
    return net.has_decoder() ? reconstruction_rmse(net, data) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void cmd_synth(const SynthOptions& o, const std::string& config_echo, std::ostream& log) {
    require(o.count >= 1, "count must be at least 1");
    require(o.classes >= 1 && o.classes <= kMotionClasses,
            "classes must be between 1 and " + std::to_string(kMotionClasses));
    require(!o.out.empty(), "out directory is required");
    const Preset preset = preset_by_name(o.preset);
    require(o.count * o.classes >= 10, "need at least 10 labeled clips to split 50/30/20");
    const ClipSize size{preset.side, preset.side, preset.frames};

    std::error_code ec;
    if (fs::exists(o.out) && !fs::is_empty(o.out, ec)) throw ConfigError("out directory " + o.out + " is not empty");
    const std::string tmp = o.out + ".partial";
    fs::remove_all(tmp, ec);
    make_dir(join(tmp, "clips"));

    Manifest manifest;
    std::size_t index = 0;
    const auto emit = [&](std::size_t class_id, std::optional<std::size_t> label, const std::string& stem) {
        Clip clip = synth_gesture_clip(class_id, derive_seed(o.seed, index++), size);
        clip.label = label;
        const std::string rel = "clips/" + stem + ".png";
        strip_write(clip, join(tmp, rel));
        manifest.records.push_back({rel, label, kUnassigned});
    };
    char stem[64];
    for (std::size_t c = 0; c < o.classes; ++c) {
        for (std::size_t j = 0; j < o.count; ++j) {
            std::snprintf(stem, sizeof stem, "%s-%04zu", motion_name(c).c_str(), j);
            emit(c, c, stem);
        }
    }
    manifest = split_dataset(manifest, o.seed);
    const std::size_t labeled = manifest.records.size();
    for (std::size_t j = 0; j < o.unlabeled; ++j) {
        std::snprintf(stem, sizeof stem, "unlabeled-%05zu", j);
        emit(j % o.classes, std::nullopt, stem);
        manifest.records.back().split = kTrain;
    }
    write_manifest(join(tmp, "manifest.csv"), manifest);
    write_file_atomic(join(tmp, kConfigEcho), config_echo);

    if (fs::exists(o.out)) fs::remove(o.out, ec);
    fs::rename(tmp, o.out, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + o.out + ": " + ec.message());
    const SplitCounts counts = split_counts(labeled);
    log << "wrote " << manifest.records.size() << " clips to " << o.out << " (train " << counts.train << ", test "
        << counts.test << ", validation " << counts.validation << ", unlabeled " << o.unlabeled << ")\n";
}

bool cmd_gradcheck(const GradcheckOptions& o, const std::string& config_echo, std::ostream& log) {
    require(o.seeds >= 1, "seeds must be at least 1");
    std::vector<std::string> names;
    if (o.scope == "all") {
        names = layer_check_names();
        names.push_back("network");
    } else if (o.scope == "network") {
        names = {"network"};
    } else {
        bool known = false;
        for (const auto& n : layer_check_names()) known = known || n == o.scope;
        require(known, "unknown layer '" + o.scope + "'");
        names = {o.scope};
    }

    std::ostringstream csv;
    csv << "layer,max_rel_error,tolerance,compared,excluded,pass\n";
    bool all_pass = true;
    for (const auto& name : names) {
        GradCheckRow worst;
        for (std::size_t s = 0; s < o.seeds; ++s) {
            const GradCheckRow row = name == "network" ? check_network_gradients(o.seed + s, o.perturb)
                                                       : check_layer_gradients(name, o.seed + s, o.perturb);
            if (s == 0 || row.max_rel_error > worst.max_rel_error) {
                const std::size_t compared = worst.compared, excluded = worst.excluded;
                worst = row;
                worst.compared += s == 0 ? 0 : compared;
                worst.excluded += s == 0 ? 0 : excluded;
            } else {
                worst.compared += row.compared;
                worst.excluded += row.excluded;
            }
        }
        all_pass = all_pass && worst.passed();
        char line[160];
        std::snprintf(line, sizeof line, "%s,%.6e,%g,%zu,%zu,%s\n", worst.name.c_str(), worst.max_rel_error,
                      worst.tolerance, worst.compared, worst.excluded, worst.passed() ? "yes" : "no");
        csv << line;
    }
    log << csv.str();
    if (!o.out.empty()) {
        make_dir(o.out);
        write_file_atomic(join(o.out, "gradcheck.csv"), csv.str());
        write_file_atomic(join(o.out, kConfigEcho), config_echo);
    }
    return all_pass;
}

void cmd_train(const TrainOptions& o, const std::string& config_echo, std::ostream& log) {
    require(o.phase == "pretrain" || o.phase == "semisup", "phase must be pretrain or semisup");
    require(!o.manifest.empty(), "manifest is required");
    require(!o.out.empty(), "out directory is required");
    require(o.unlabeled_per_labeled >= 1, "unlabeled-ratio must be at least 1");
    require(o.resume.empty() || o.init.empty(), "resume and init are mutually exclusive");
    o.sgd.validate();
    o.loss.validate();
    const bool pretrain = o.phase == "pretrain";
    const Topology topology = pretrain ? Topology::autoencoder : parse_topology(o.topology);
    require(pretrain || topology != Topology::autoencoder, "semisup phase needs a topology with a head");
    PretrainConfig pc;
    pc.sgd = o.sgd;
    pc.stage_epochs = o.stage_epochs;
    pc.finetune_epochs = o.finetune_epochs;
    pc.convergence_tolerance = o.convergence_tolerance;
    pc.convergence_window = o.convergence_window;
    pc.freeze_mix = o.freeze_mix;
    if (pretrain) pc.validate();
    const NetworkConfig config = network_config(o.network, topology, o.sgd.seed);

    const Manifest manifest = read_manifest(o.manifest);
    const std::string base = base_dir_of(o.manifest);
    const auto train_records = manifest.with_split(kTrain);

    std::optional<LoadedCheckpoint> resumed;
    if (!o.resume.empty()) resumed = load_checkpoint(o.resume);
    Network net = resumed ? std::move(resumed->net) : build_network(config);
    if (!o.init.empty()) {
        const std::size_t copied = net.copy_matching_params(load_checkpoint(o.init).net);
        log << "initialized " << copied << " parameters from " << o.init << "\n";
    }

    if (pretrain) {
        require(net.topology() == Topology::autoencoder, "pretraining resumes only from an autoencoder checkpoint");
        require(!train_records.empty(), "manifest has no train records");
        const auto data = examples_of(train_records, base, false);
        const std::size_t first = resumed ? resumed->extras.pretrain_stages_done + 1 : 1;
        require(first <= net.pair_count() + 1, "checkpoint has finished pretraining already");
        const PretrainLog plog = pretrain_layerwise(net, data, pc, first);
        make_dir(o.out);
        CheckpointExtras extras;
        extras.pretrain_stages_done = first - 1 + plog.stages.size();
        save_checkpoint(join(o.out, "model.ckpt"), net, extras);
        write_stage_log_csv(join(o.out, "stages.csv"), plog);
        write_file_atomic(join(o.out, kConfigEcho), config_echo);
        for (const auto& st : plog.stages) {
            log << "stage " << st.stage << ": frozen phase " << st.frozen_phase.losses.size() << " epochs, loss "
                << fmt(st.frozen_phase.losses.back()) << "; fine-tune loss "
                << fmt(st.finetune.losses.empty() ? st.frozen_phase.losses.back() : st.finetune.losses.back()) << "\n";
        }
        return;
    }

    require(net.has_head(), "joint training resumes only from a checkpoint with a prediction head");
    const auto labeled_records = labeled_only(train_records);
    require(!labeled_records.empty(), "semisup needs at least one labeled train record");
    const auto labeled = examples_of(labeled_records, base);
    const auto unlabeled = examples_of(unlabeled_only(train_records), base);
    SemisupOptions so;
    so.unlabeled_per_labeled = o.unlabeled_per_labeled;
    so.freeze_mix = o.freeze_mix;
    so.validation = examples_of(labeled_only(manifest.with_split(kValidation)), base);

    TrainState state;
    if (resumed) {
        require(resumed->extras.train.has_value(), "checkpoint " + o.resume + " holds no joint-training state");
        state = *resumed->extras.train;
        log << "resuming at epoch " << state.next_epoch << "\n";
    }
    train_semisupervised(net, labeled, unlabeled, o.loss, o.sgd, so, &state);
    make_dir(o.out);
    CheckpointExtras extras;
    extras.train = state;
    save_checkpoint(join(o.out, "model.ckpt"), net, extras);
    write_history_csv(join(o.out, "history.csv"), state.history);
    write_file_atomic(join(o.out, kConfigEcho), config_echo);
    if (!state.history.empty()) {
        const HistoryRow& last = state.history.back();
        log << "epoch " << last.epoch << ": total " << fmt(last.l_total) << ", softmax " << fmt(last.l_softmax)
            << ", recon " << fmt(last.l_recon) << ", validation accuracy " << fmt(last.val_accuracy) << "\n";
    }
}

void cmd_eval(const EvalOptions& o, const std::string& config_echo, std::ostream& log) {
    require(!o.checkpoint.empty(), "checkpoint is required");
    require(!o.manifest.empty(), "manifest is required");
    require(!o.out.empty(), "out directory is required");
    validate_split(o.split);
    const IlluminationProfile profile = IlluminationProfile::parse(o.profile);

    const LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
    require(ck.net.has_head(), "evaluation needs a checkpoint with a prediction head");
    const Manifest manifest = read_manifest(o.manifest);
    auto clips = load_clips(labeled_only(manifest.with_split(o.split)), base_dir_of(o.manifest));
    require(!clips.empty(), "no labeled records in split " + o.split);
    for (auto& c : clips) c = apply_illumination(c, profile);
    const auto data = to_examples(clips);
    const Evaluation ev = evaluate(ck.net, data);
    const double recon = recon_error(ck.net, data);

    std::ostringstream csv;
    csv << "split,profile,count,accuracy,recon_error\n"
        << o.split << ",\"" << profile.to_string() << "\"," << data.size() << "," << fmt(ev.accuracy) << ","
        << fmt(recon) << "\n";
    std::ostringstream conf;
    conf << "true";
    for (std::size_t p = 0; p < ev.confusion.size(); ++p) conf << ",pred" << p;
    conf << "\n";
    for (std::size_t t = 0; t < ev.confusion.size(); ++t) {
        conf << t;
        for (std::size_t n : ev.confusion[t]) conf << "," << n;
        conf << "\n";
    }
    make_dir(o.out);
    write_file_atomic(join(o.out, "eval.csv"), csv.str());
    write_file_atomic(join(o.out, "confusion.csv"), conf.str());
    write_file_atomic(join(o.out, kConfigEcho), config_echo);
    log << csv.str();
}

void cmd_invariance_bench(const InvarianceOptions& o, const std::string& config_echo, std::ostream& log) {
    require(!o.none.empty() && !o.lrn.empty() && !o.illum.empty(),
            "checkpoints for all three front-ends (none, lrn, illum) are required");
    require(!o.manifest.empty(), "manifest is required");
    require(!o.out.empty(), "out directory is required");
    require(!o.profiles.empty(), "at least one profile is required");
    validate_split(o.split);
    std::vector<IlluminationProfile> profiles;
    for (const auto& p : o.profiles) profiles.push_back(IlluminationProfile::parse(p));

    const Manifest manifest = read_manifest(o.manifest);
    const auto clips = load_clips(labeled_only(manifest.with_split(o.split)), base_dir_of(o.manifest));
    require(!clips.empty(), "no labeled records in split " + o.split);

    std::ostringstream csv;
    csv << "profile,config,accuracy,recon_error\n";
    const std::pair<FrontEnd, const std::string*> models[] = {
        {FrontEnd::none, &o.none}, {FrontEnd::lrn, &o.lrn}, {FrontEnd::illum, &o.illum}};
    for (const auto& [front, path] : models) {
        const LoadedCheckpoint ck = load_checkpoint(*path);
        require(ck.net.config().front_end == front,
                "checkpoint " + *path + " has front-end " + to_string(ck.net.config().front_end) + ", expected " +
                    to_string(front));
        require(ck.net.has_head(), "checkpoint " + *path + " has no prediction head");
        for (const auto& profile : profiles) {
            std::vector<Clip> perturbed;
            perturbed.reserve(clips.size());
            for (const auto& c : clips) perturbed.push_back(apply_illumination(c, profile));
            const auto data = to_examples(perturbed);
            csv << "\"" << profile.to_string() << "\"," << to_string(front) << "," << fmt(evaluate(ck.net, data).accuracy)
                << "," << fmt(recon_error(ck.net, data)) << "\n";
        }
    }
    make_dir(o.out);
    write_file_atomic(join(o.out, "invariance.csv"), csv.str());
    write_file_atomic(join(o.out, kConfigEcho), config_echo);
    log << csv.str();
}

void cmd_grid_search(const GridSearchOptions& o, const std::string& config_echo, std::ostream& log) {
    require(!o.taus.empty() && !o.etas.empty(), "tau and eta grids must be nonempty");
    require(!o.manifest.empty(), "manifest is required");
    require(!o.out.empty(), "out directory is required");
    o.sgd.validate();
    NetworkOptions net_opts = o.network;
    net_opts.front_end = "illum";
    NetworkConfig base_config = network_config(net_opts, Topology::predictor, o.sgd.seed);
    for (double v : o.taus) require(v > 0.0, "tau must be positive");
    for (double v : o.etas) require(v > 0.0, "eta must be positive");

    const Manifest manifest = read_manifest(o.manifest);
    const std::string base = base_dir_of(o.manifest);
    const auto train = examples_of(labeled_only(manifest.with_split(kTrain)), base);
    const auto validation = examples_of(labeled_only(manifest.with_split(kValidation)), base);
    require(!train.empty(), "manifest has no labeled train records");
    require(!validation.empty(), "grid search scores on the validation split, which is empty");

    const auto eval = [&](const TauEta& te) {
        NetworkConfig c = base_config;
        c.illum_gamma = 1.0;
        c.illum_delta = 0.0;
        c.illum_beta = 1.0 / te.tau;
        c.illum_alpha = te.eta / te.tau;
        Network net = build_network(c);
        try {
            train_semisupervised(net, train, {}, LossSchedule{}, o.sgd);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        const double score = evaluate(net, validation).accuracy;
        log << "tau " << fmt(te.tau) << " eta " << fmt(te.eta) << ": validation accuracy " << fmt(score) << "\n";
        return score;
    };
    const GridSearchResult result = grid_search_tau_eta(o.taus, o.etas, eval);
    std::ostringstream csv;
    write_grid_csv(csv, result);
    make_dir(o.out);
    write_file_atomic(join(o.out, "grid.csv"), csv.str());
    write_file_atomic(join(o.out, kConfigEcho), config_echo);
    log << "best tau " << fmt(result.best.tau) << " eta " << fmt(result.best.eta) << " score "
        << fmt(result.best_score) << "\n";
}

}  // namespace stnet::cli
