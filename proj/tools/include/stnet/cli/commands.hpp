#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stnet/model/train.hpp"

namespace stnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

/// Runs one command line (without the program name) and returns the exit
/// code. Errors are reported on err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct NetworkOptions {
    std::string preset = "desk";
    std::string front_end = "none";
    double illum_alpha = 1.0;
    double illum_beta = 1e-6;
    double illum_gamma = 1.0;
    double illum_delta = 0.0;
    std::size_t mix_window = 3;
};

struct SynthOptions {
    std::size_t count = 0;  ///< clips per class
    std::size_t classes = 8;
    /// Extra label-free clips tagged train, for semi-supervised runs.
    std::size_t unlabeled = 0;
    std::string preset = "desk";
    std::string out;
    std::uint64_t seed = 1;
};

struct GradcheckOptions {
    std::string scope = "all";
    std::uint64_t seed = 1;
    std::size_t seeds = 1;
    std::string out;  ///< directory; empty prints the report only
    double perturb = 0.0;
};

struct TrainOptions {
    std::string phase = "semisup";
    std::string topology = "semisup";
    std::string manifest;
    std::string out;
    std::string resume;
    std::string init;
    NetworkOptions network;
    SgdConfig sgd;
    LossSchedule loss;
    std::size_t unlabeled_per_labeled = 1;
    std::size_t stage_epochs = 40;
    std::size_t finetune_epochs = 10;
    double convergence_tolerance = 1e-3;
    std::size_t convergence_window = 5;
    bool freeze_mix = false;
};

struct EvalOptions {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    std::string profile = "constant(1)";
    std::string out;
};

struct InvarianceOptions {
    std::string none;
    std::string lrn;
    std::string illum;
    std::string manifest;
    std::string split = "test";
    std::vector<std::string> profiles = {"constant(1)", "constant(2)", "ramp(0.5,1.5)"};
    std::string out;
};

struct GridSearchOptions {
    std::vector<double> taus = {1e2, 1e4, 1e6};
    std::vector<double> etas = {1e2, 1e4, 1e6};
    std::string manifest;
    std::string out;
    NetworkOptions network;
    SgdConfig sgd;
};

/// Each command validates its options before touching the filesystem and
/// echoes the effective configuration text into its output directory.
void cmd_synth(const SynthOptions& o, const std::string& config_echo, std::ostream& log);
/// Returns true when every row passes.
bool cmd_gradcheck(const GradcheckOptions& o, const std::string& config_echo, std::ostream& log);
void cmd_train(const TrainOptions& o, const std::string& config_echo, std::ostream& log);
void cmd_eval(const EvalOptions& o, const std::string& config_echo, std::ostream& log);
void cmd_invariance_bench(const InvarianceOptions& o, const std::string& config_echo, std::ostream& log);
void cmd_grid_search(const GridSearchOptions& o, const std::string& config_echo, std::ostream& log);

}  // namespace stnet::cli
