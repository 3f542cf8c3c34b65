#include <cctype>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "stnet/cli/commands.hpp"
#include "stnet/error.hpp"

namespace stnet::cli {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// key=value lines; '#' and ';' start comments; values may be quoted.
std::vector<std::string> config_file_args(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::vector<std::string> args;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        args.push_back("--" + key + "=" + value);
    }
    return args;
}

void add_network(CLI::App* app, NetworkOptions& n) {
    app->add_option("--preset", n.preset, "paper, desk or tiny");
    app->add_option("--frontend", n.front_end, "none, lrn or illum");
    app->add_option("--illum-alpha", n.illum_alpha);
    app->add_option("--illum-beta", n.illum_beta);
    app->add_option("--illum-gamma", n.illum_gamma);
    app->add_option("--illum-delta", n.illum_delta);
    app->add_option("--mix-window", n.mix_window, "moving-average window of the frame mixer");
}

void add_sgd(CLI::App* app, SgdConfig& s) {
    app->add_option("--lr", s.learning_rate);
    app->add_option("--momentum", s.momentum);
    app->add_option("--batch", s.batch_size);
    app->add_option("--epochs", s.max_epochs);
    app->add_option("--decay", s.decay, "learning-rate factor applied every third of the epochs");
    app->add_option("--seed", s.seed);
}

template <typename T>
std::vector<T> split_list(const std::string& text, char sep, const std::function<T(const std::string&)>& convert) {
    std::vector<T> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(convert(item));
    }
    return out;
}

double to_number(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size()) throw ConfigError("bad number '" + text + "'");
    return v;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    SynthOptions synth;
    GradcheckOptions grad;
    TrainOptions train;
    EvalOptions eval;
    InvarianceOptions bench;
    GridSearchOptions grid;

    CLI::App app{"Spatio-temporal autoencoder and gesture classifier"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    app.footer("Every command also takes --config FILE with key=value lines named like its flags;\n"
               "flags given on the command line override the file.");
    std::string profiles_text = "constant(1);constant(2);ramp(0.5,1.5)";
    std::string taus_text = "1e2,1e4,1e6";
    std::string etas_text = "1e2,1e4,1e6";

    auto* s = app.add_subcommand("synth", "write synthetic gesture clips, a manifest and a 50/30/20 split");
    s->add_option("--count", synth.count, "clips per class")->required();
    s->add_option("--classes", synth.classes);
    s->add_option("--unlabeled", synth.unlabeled, "extra label-free train clips");
    s->add_option("--preset", synth.preset);
    s->add_option("--out", synth.out)->required();
    s->add_option("--seed", synth.seed);

    auto* g = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
    g->add_option("--scope", grad.scope, "all (every layer and the network), network or one layer name");
    g->add_option("--seed", grad.seed);
    g->add_option("--seeds", grad.seeds, "number of consecutive seeds");
    g->add_option("--out", grad.out);
    g->add_option("--perturb", grad.perturb)->group("");

    auto* t = app.add_subcommand("train", "layer-wise pretraining or joint training");
    t->add_option("--phase", train.phase, "pretrain or semisup");
    t->add_option("--topology", train.topology, "semisup or predictor (semisup phase)");
    t->add_option("--manifest", train.manifest)->required();
    t->add_option("--out", train.out)->required();
    t->add_option("--resume", train.resume, "checkpoint to continue from");
    t->add_option("--init", train.init, "checkpoint whose matching parameters seed the network");
    add_network(t, train.network);
    add_sgd(t, train.sgd);
    t->add_option("--alpha", train.loss.alpha_recon, "initial reconstruction weight");
    t->add_option("--alpha-decay", train.loss.alpha_decay);
    t->add_option("--beta", train.loss.beta_pred, "prediction weight when not calibrated");
    t->add_option("--calibration-ratio", train.loss.beta_calibration_ratio);
    t->add_option("--calibrate", train.loss.calibrate);
    t->add_option("--unlabeled-ratio", train.unlabeled_per_labeled, "unlabeled clips per labeled clip");
    t->add_option("--stage-epochs", train.stage_epochs);
    t->add_option("--finetune-epochs", train.finetune_epochs);
    t->add_option("--tolerance", train.convergence_tolerance);
    t->add_option("--window", train.convergence_window);
    t->add_flag("--freeze-mix", train.freeze_mix);

    auto* e = app.add_subcommand("eval", "accuracy and reconstruction error on one split");
    e->add_option("--checkpoint", eval.checkpoint)->required();
    e->add_option("--manifest", eval.manifest)->required();
    e->add_option("--split", eval.split);
    e->add_option("--profile", eval.profile, "illumination applied to the clips, e.g. ramp(0.5,1.5)");
    e->add_option("--out", eval.out)->required();

    auto* b = app.add_subcommand("invariance-bench", "accuracy of three front-ends under illumination profiles");
    b->add_option("--none", bench.none)->required();
    b->add_option("--lrn", bench.lrn)->required();
    b->add_option("--illum", bench.illum)->required();
    b->add_option("--manifest", bench.manifest)->required();
    b->add_option("--split", bench.split);
    b->add_option("--profiles", profiles_text, "semicolon-separated profiles");
    b->add_option("--out", bench.out)->required();

    auto* gs = app.add_subcommand("grid-search", "tau/eta grid search on validation accuracy");
    gs->add_option("--taus", taus_text, "comma-separated tau grid");
    gs->add_option("--etas", etas_text, "comma-separated eta grid");
    gs->add_option("--manifest", grid.manifest)->required();
    gs->add_option("--out", grid.out)->required();
    add_network(gs, grid.network);
    add_sgd(gs, grid.sgd);

    // Config-file entries go before the command-line flags so the last
    // occurrence, the flag, wins.
    std::vector<std::string> args;
    try {
        std::vector<std::string> rest;
        std::string config_path;
        for (std::size_t i = 0; i < raw_args.size(); ++i) {
            const std::string& a = raw_args[i];
            if (a == "--config" && i + 1 < raw_args.size()) {
                config_path = raw_args[++i];
            } else if (a.rfind("--config=", 0) == 0) {
                config_path = a.substr(9);
            } else {
                rest.push_back(a);
            }
        }
        if (!config_path.empty() && !rest.empty()) {
            args.push_back(rest.front());
            for (auto& a : config_file_args(config_path)) args.push_back(std::move(a));
            args.insert(args.end(), rest.begin() + 1, rest.end());
        } else {
            args = std::move(rest);
        }
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const IoError& ex) {
        err << "io error: " << ex.what() << "\n";
        return kExitIo;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        for (auto* sub : app.get_subcommands()) out << sub->help();
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string echo = "# " + chosen->get_name() + "\n" + chosen->config_to_str(true, false);
    try {
        const auto keep = [](const std::string& x) { return x; };
        bench.profiles = split_list<std::string>(profiles_text, ';', keep);
        grid.taus = split_list<double>(taus_text, ',', to_number);
        grid.etas = split_list<double>(etas_text, ',', to_number);
        if (chosen == s) cmd_synth(synth, echo, out);
        if (chosen == g && !cmd_gradcheck(grad, echo, out)) {
            err << "gradient check failed\n";
            return kExitNumeric;
        }
        if (chosen == t) cmd_train(train, echo, out);
        if (chosen == e) cmd_eval(eval, echo, out);
        if (chosen == b) cmd_invariance_bench(bench, echo, out);
        if (chosen == gs) cmd_grid_search(grid, echo, out);
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& ex) {
        err << "numeric error: " << ex.what() << "\n";
        return kExitNumeric;
    } catch (const FormatError& ex) {
        err << "io error: " << ex.what() << "\n";
        return kExitIo;
    } catch (const IoError& ex) {
        err << "io error: " << ex.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& ex) {
        err << "io error: " << ex.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

}  // namespace stnet::cli
