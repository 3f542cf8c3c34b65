#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "stnet/data/clip.hpp"
#include "stnet/error.hpp"
#include "stnet/model/checkpoint.hpp"
#include "stnet/model/network.hpp"
#include "stnet/model/train.hpp"
#include "stnet/model/verify.hpp"
#include "stnet/rng.hpp"
#include "support/gen.hpp"

using namespace stnet;

namespace {

bool ends_with(const std::string& s, const std::string& tail) {
    return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

Tensor random_input(const Network& net, std::uint64_t seed) {
    return fill_random(net.config().input, seed, UniformDist{0, 1});
}

std::vector<Example> tiny_examples(std::size_t n, std::uint64_t seed, bool labeled = true) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Example e{fill_random({1, 3, 9, 9}, derive_seed(seed, i), UniformDist{0, 1}), std::nullopt};
        if (labeled) e.label = i % 3;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Example> desk_clips(std::size_t n, std::uint64_t seed) {
    std::vector<Clip> clips;
    for (std::size_t i = 0; i < n; ++i) clips.push_back(synth_gesture_clip(i % kMotionClasses, derive_seed(seed, i)));
    return to_examples(clips);
}

bool all_zero(const Tensor& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](double v) { return v == 0.0; });
}

// Zeroes every head weight so the logits equal the final bias.
void make_constant_predictor(Network& net, std::size_t winner) {
    std::optional<std::size_t> last_bias;
    for (std::size_t id : net.head_params()) {
        if (ends_with(net.params().name(id), ".weights")) net.params().value(id).fill(0.0);
        if (ends_with(net.params().name(id), ".bias")) last_bias = id;
    }
    REQUIRE(last_bias);
    Tensor& b = net.params().value(*last_bias);
    b.fill(0.0);
    b[winner] = 5.0;
}

}  // namespace

TEST_SUITE("presets") {
    TEST_CASE("paper autoencoder has a 4096-wide code and reproduces its input shape") {
        const NetworkPlan plan = plan_network(make_config(paper_preset(), Topology::autoencoder));
        CHECK(plan.code_width == 4096);
        CHECK(plan.output == Shape{1, 9, 145, 145});
        CHECK(plan.pair_count == 3);
    }

    TEST_CASE("paper predictor ends in eight classes") {
        const NetworkPlan plan = plan_network(make_config(paper_preset(), Topology::predictor));
        CHECK(plan.classes == 8);
        CHECK(plan.output == Shape{8});
    }

    TEST_CASE("desk preset") {
        const NetworkPlan ae = plan_network(make_config(desk_preset(), Topology::autoencoder));
        CHECK(ae.code_width == 256);
        CHECK(ae.output == Shape{1, 9, 33, 33});
        const NetworkPlan semi = plan_network(make_config(desk_preset(), Topology::semisupervised));
        CHECK(semi.classes == 8);
        const Network net = build_network(make_config(desk_preset(), Topology::semisupervised));
        CHECK(net.code_width() == 256);
        CHECK(net.num_classes() == 8);
    }

    TEST_CASE("shape inference is recorded per layer") {
        const NetworkPlan plan = plan_network(make_config(desk_preset(), Topology::semisupervised));
        REQUIRE_FALSE(plan.layers.empty());
        for (const auto& l : plan.layers) CHECK_FALSE(l.output.empty());
    }

    TEST_CASE("non-composing layers name the boundary") {
        NetworkConfig cfg = make_config(desk_preset(), Topology::autoencoder);
        cfg.input = {1, 8, 33, 33};
        try {
            plan_network(cfg);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("frames") != std::string::npos);
        }
    }

    TEST_CASE("unknown preset") {
        CHECK_THROWS_AS(preset_by_name("huge"), ConfigError);
    }

    TEST_CASE("initialization: zero biases, bounded weights, moving-average mixer") {
        const Network net = build_network(make_config(tiny_preset(), Topology::semisupervised, FrontEnd::illum));
        for (std::size_t id = 0; id < net.params().size(); ++id) {
            const std::string& name = net.params().name(id);
            if (ends_with(name, ".bias")) CHECK(all_zero(net.params().value(id)));
        }
        const auto illum = net.illum_params();
        REQUIRE(illum);
        CHECK(illum->mix == moving_average_weights(3, 3));
        CHECK(illum->beta_shift == 1e-6);
    }
}

TEST_SUITE("forward") {
    TEST_CASE("autoencoder reports reconstruction loss only") {
        const Network net = build_network(make_config(tiny_preset(), Topology::autoencoder));
        const ForwardPass pass = net.forward(random_input(net, 1), std::size_t{1});
        CHECK(pass.losses.has_recon);
        CHECK_FALSE(pass.losses.has_softmax);
        CHECK(pass.losses.total == pass.losses.recon);
        CHECK(pass.reconstruction.shape() == net.config().input);
    }

    TEST_CASE("weighted total for labeled and unlabeled clips") {
        const Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        const Tensor x = random_input(net, 2);
        const LossWeights w{0.3, 7.0};
        const ForwardPass labeled = net.forward(x, std::size_t{2}, w);
        CHECK(labeled.losses.has_softmax);
        CHECK(labeled.losses.total == doctest::Approx(0.3 * labeled.losses.recon + 7.0 * labeled.losses.softmax));
        const ForwardPass unlabeled = net.forward(x, std::nullopt, w);
        CHECK_FALSE(unlabeled.losses.has_softmax);
        CHECK(unlabeled.losses.total == doctest::Approx(0.3 * unlabeled.losses.recon));
    }

    TEST_CASE("input shape mismatch") {
        const Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        CHECK_THROWS_AS(net.forward(Tensor({1, 3, 8, 8})), ShapeError);
        CHECK_THROWS_AS(net.predict(Tensor({1, 2, 9, 9})), ShapeError);
    }

    TEST_CASE("predict is a deterministic distribution") {
        for (auto topo : {Topology::predictor, Topology::semisupervised}) {
            for (auto front : {FrontEnd::none, FrontEnd::lrn, FrontEnd::illum}) {
                const Network net = build_network(make_config(tiny_preset(), topo, front, 3));
                for (std::uint64_t s = 0; s < 5; ++s) {
                    const Tensor x = random_input(net, s);
                    const Tensor p = net.predict(x);
                    double total = 0;
                    for (double v : p.data()) {
                        CHECK(v >= 0.0);
                        total += v;
                    }
                    CHECK(std::abs(total - 1.0) <= 1e-12);
                    CHECK(net.predict(x) == p);
                }
            }
        }
        const Network ae = build_network(make_config(tiny_preset(), Topology::autoencoder));
        CHECK_THROWS_AS(ae.predict(random_input(ae, 1)), ConfigError);
    }

    TEST_CASE("one parameter store serves both branches") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        const Tensor x = random_input(net, 4);
        const ForwardPass before = net.forward(x, std::size_t{0});
        const std::size_t enc = net.encoder_params().front();
        net.params().value(enc) *= 1.5;
        const ForwardPass after = net.forward(x, std::size_t{0});
        CHECK_FALSE(after.reconstruction == before.reconstruction);
        CHECK_FALSE(after.logits == before.logits);
        // the head and the decoder read disjoint parameter sets
        for (std::size_t h : net.head_params()) {
            const auto d = net.decoder_params();
            CHECK(std::find(d.begin(), d.end(), h) == d.end());
        }
    }

    TEST_CASE("an unlabeled clip leaves the head gradient at zero") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised, FrontEnd::illum));
        const ForwardPass pass = net.forward(random_input(net, 5));
        Gradients g = net.params().zero_grads();
        net.backward(pass, g);
        for (std::size_t id : net.head_params()) CHECK(all_zero(g[id]));
        bool encoder_moved = false, decoder_moved = false;
        for (std::size_t id : net.encoder_params()) encoder_moved |= !all_zero(g[id]);
        for (std::size_t id : net.decoder_params()) decoder_moved |= !all_zero(g[id]);
        CHECK(encoder_moved);
        CHECK(decoder_moved);
    }

    TEST_CASE("end-to-end gradient matches finite differences") {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const GradCheckRow row = check_network_gradients(seed);
            CHECK(row.max_rel_error < kNetworkGradTolerance);
            CHECK(row.compared > 100);
        }
    }
}

TEST_SUITE("training") {
    TEST_CASE("sgd defaults and schedule") {
        const SgdConfig sgd;
        CHECK(sgd.batch_size == 22);
        CHECK(sgd.learning_rate == 0.01);
        CHECK(sgd.momentum == 0.9);
        SgdConfig s;
        s.max_epochs = 30;
        CHECK(scheduled_rate(s, 0) == doctest::Approx(0.01));
        CHECK(scheduled_rate(s, 9) == doctest::Approx(0.01));
        CHECK(scheduled_rate(s, 10) == doctest::Approx(0.001));
        CHECK(scheduled_rate(s, 29) == doctest::Approx(0.0001));
        s.momentum = 1.0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
        s = {};
        s.batch_size = 0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }

    TEST_CASE("momentum update rule") {
        ParamStore store;
        store.add("w", Tensor::from({1.0}));
        SgdOptimizer opt(store, 0.5);
        opt.set_trainable({0});
        const Gradients g{Tensor::from({2.0})};
        opt.step(store, g, 0.1);  // v = -0.2
        CHECK(store.value(0)[0] == doctest::Approx(0.8));
        opt.step(store, g, 0.1);  // v = -0.1 - 0.2
        CHECK(store.value(0)[0] == doctest::Approx(0.5));
        SgdOptimizer frozen(store, 0.5);
        frozen.set_trainable({});
        frozen.step(store, g, 0.1);
        CHECK(store.value(0)[0] == doctest::Approx(0.5));
    }

    TEST_CASE("loss schedule validation") {
        LossSchedule s;
        CHECK(s.beta_calibration_ratio == 10.0);
        s.alpha_decay = 0.0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
        s = {};
        s.alpha_recon = -1;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }

    TEST_CASE("calibration identity") {
        const Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        for (double alpha : {1.0, 0.25, 40.0}) {
            for (double ratio : {10.0, 3.0}) {
                LossSchedule s;
                s.alpha_recon = alpha;
                s.beta_calibration_ratio = ratio;
                const Calibration c = calibrate_beta(net, tiny_examples(6, 7), s);
                const double lhs = c.beta_pred * c.l_softmax;
                const double rhs = ratio * alpha * c.l_recon;
                CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(rhs));
            }
        }
        CHECK_THROWS_AS(calibrate_beta(net, tiny_examples(3, 7, false), LossSchedule{}), ConfigError);
    }

    TEST_CASE("alpha decays per epoch and beta is held after calibration") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        LossSchedule s;
        s.alpha_decay = 0.5;
        SgdConfig sgd;
        sgd.max_epochs = 4;
        sgd.batch_size = 3;
        TrainState st;
        train_semisupervised(net, tiny_examples(6, 1), tiny_examples(6, 2, false), s, sgd, {}, &st);
        CHECK(st.next_epoch == 4);
        // the weight used in the last of four epochs
        CHECK(st.alpha_recon == doctest::Approx(1.0 / 8.0));
        CHECK(st.calibrated);
        CHECK(st.beta_pred > 0);
        CHECK(st.history.size() == 4);
    }

    TEST_CASE("alpha decay of 1 keeps alpha constant") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        SgdConfig sgd;
        sgd.max_epochs = 3;
        TrainState st;
        train_semisupervised(net, tiny_examples(3, 1), {}, LossSchedule{}, sgd, {}, &st);
        CHECK(st.alpha_recon == 1.0);
    }

    TEST_CASE("empty labeled stream is a config error") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        CHECK_THROWS_AS(train_semisupervised(net, {}, tiny_examples(4, 1, false), LossSchedule{}, SgdConfig{}),
                        ConfigError);
        Network ae = build_network(make_config(tiny_preset(), Topology::autoencoder));
        CHECK_THROWS_AS(train_semisupervised(ae, tiny_examples(3, 1), {}, LossSchedule{}, SgdConfig{}),
                        ConfigError);
    }

    TEST_CASE("interleave puts ratio unlabeled clips after each labeled one") {
        const auto lab = tiny_examples(2, 1);
        const auto unl = tiny_examples(4, 2, false);
        const auto order = interleave(lab, unl, 2, 9);
        REQUIRE(order.size() == 6);
        for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i]->label.has_value() == (i % 3 == 0));
        // the shorter stream cycles until the longer one is used up
        const auto cycled = interleave(tiny_examples(1, 1), unl, 1, 9);
        CHECK(cycled.size() == 8);
        CHECK(interleave(lab, unl, 2, 9) == order);
    }

    TEST_CASE("layer-wise pretraining freezes earlier pairs") {
        Network net = build_network(make_config(tiny_preset(), Topology::autoencoder));
        PretrainConfig cfg;
        cfg.sgd.learning_rate = 0.05;
        cfg.sgd.batch_size = 2;
        cfg.stage_epochs = 4;
        cfg.finetune_epochs = 2;
        const PretrainLog log = pretrain_layerwise(net, tiny_examples(4, 3, false), cfg);
        REQUIRE(log.stages.size() == net.pair_count());
        for (const auto& st : log.stages) {
            CHECK(st.frozen_phase.frozen_before == st.frozen_phase.frozen_after);
            CHECK_FALSE(st.frozen_phase.trainable.empty());
            CHECK(st.finetune.frozen.empty());
            CHECK(st.finetune.losses.size() == 2);
            for (const auto& name : st.frozen_phase.frozen) {
                const auto& t = st.frozen_phase.trainable;
                CHECK(std::find(t.begin(), t.end(), name) == t.end());
            }
        }
        CHECK(log.stages[0].frozen_phase.frozen.empty());
        CHECK_FALSE(log.stages[1].frozen_phase.frozen.empty());
    }

    TEST_CASE("desk autoencoder pretrains in three stages") {
        Network net = build_network(make_config(desk_preset(), Topology::autoencoder));
        PretrainConfig cfg;
        cfg.sgd.batch_size = 1;
        cfg.stage_epochs = 1;
        cfg.finetune_epochs = 1;
        const PretrainLog log = pretrain_layerwise(net, desk_clips(2, 1), cfg);
        CHECK(log.stages.size() == 3);
        for (const auto& st : log.stages) CHECK(st.frozen_phase.frozen_before == st.frozen_phase.frozen_after);
    }

    TEST_CASE("pretraining needs an autoencoder") {
        Network net = build_network(make_config(tiny_preset(), Topology::semisupervised));
        CHECK_THROWS_AS(pretrain_layerwise(net, tiny_examples(2, 1), PretrainConfig{}), ConfigError);
    }

    TEST_CASE("convergence rule") {
        CHECK_FALSE(loss_converged({1, 0.5, 0.25}, 5, 1e-3));
        CHECK(loss_converged({1, 1, 1, 1, 1, 1}, 5, 1e-3));
        CHECK_FALSE(loss_converged({1, 1, 1, 1, 1, 0.9}, 5, 1e-3));
    }

    TEST_CASE("desk overfit: loss at epoch 50 below 10% of epoch 1") {
        // Raw dark-scene clips sit on a long plateau at this budget; the
        // normalized target of the illum front-end has unit-scale contrast.
        Network net = build_network(make_config(desk_preset(), Topology::autoencoder, FrontEnd::illum));
        SgdConfig sgd;
        sgd.learning_rate = 1.0;
        sgd.batch_size = 1;
        sgd.max_epochs = 50;
        sgd.decay = 1.0;
        const auto losses = train_autoencoder(net, desk_clips(10, 11), sgd);
        REQUIRE(losses.size() == 50);
        CHECK(losses.back() < 0.1 * losses.front());
    }

    TEST_CASE("overfitting one clip predicts its label") {
        Network net = build_network(make_config(tiny_preset(), Topology::predictor));
        const auto data = tiny_examples(1, 5);
        SgdConfig sgd;
        sgd.max_epochs = 60;
        sgd.batch_size = 1;
        sgd.decay = 1.0;
        train_semisupervised(net, data, {}, LossSchedule{}, sgd);
        const Tensor p = net.predict(data[0].input);
        CHECK(std::max_element(p.data().begin(), p.data().end()) - p.data().begin() == 0);
    }

    TEST_CASE("history csv header") {
        const std::string csv = history_csv({HistoryRow{0, 1, 2, 3, 0.5}});
        CHECK(csv.rfind("epoch,l_recon,l_softmax,l_total,val_accuracy\n", 0) == 0);
    }
}

TEST_SUITE("evaluation") {
    TEST_CASE("constant predictor on a balanced set") {
        Network net = build_network(make_config(tiny_preset(), Topology::predictor));
        make_constant_predictor(net, 1);
        const auto data = tiny_examples(9, 1);
        const Evaluation ev = evaluate(net, data);
        CHECK(ev.accuracy == doctest::Approx(1.0 / 3.0));
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(ev.confusion[i][1] == 3);
            std::size_t row = 0;
            for (auto c : ev.confusion[i]) row += c;
            CHECK(row == 3);
        }
    }

    TEST_CASE("a perfect predictor gives a diagonal confusion") {
        Network net = build_network(make_config(tiny_preset(), Topology::predictor));
        make_constant_predictor(net, 2);
        auto data = tiny_examples(4, 1);
        for (auto& e : data) e.label = 2;
        const Evaluation ev = evaluate(net, data);
        CHECK(ev.accuracy == 1.0);
        CHECK(ev.confusion[2][2] == 4);
    }

    TEST_CASE("empty or unlabeled sets") {
        const Network net = build_network(make_config(tiny_preset(), Topology::predictor));
        CHECK_THROWS_AS(evaluate(net, {}), ConfigError);
        CHECK_THROWS_AS(evaluate(net, tiny_examples(2, 1, false)), ConfigError);
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("encode, decode, encode is byte-identical and forward is unchanged") {
        for (auto front : {FrontEnd::none, FrontEnd::lrn, FrontEnd::illum}) {
            Network net = build_network(make_config(tiny_preset(), Topology::semisupervised, front, 8));
            for (std::size_t id = 0; id < net.params().size(); ++id)
                net.params().value(id) = fill_random(net.params().value(id).shape(), id + 100, UniformDist{-1, 1});
            TrainState st;
            st.next_epoch = 3;
            st.alpha_recon = 0.7;
            st.beta_pred = 12.5;
            st.calibrated = true;
            st.history = {HistoryRow{0, 1.5, 0.5, 2.0, 0.25}};
            st.velocities = net.params().zero_grads();
            const CheckpointExtras extras{st, 2};
            const std::string bytes = encode_checkpoint(net, extras);
            CHECK(bytes.substr(0, 4) == "GNET");
            const LoadedCheckpoint back = decode_checkpoint(bytes);
            CHECK(encode_checkpoint(back.net, back.extras) == bytes);
            CHECK(back.extras == extras);
            CHECK(back.net.params() == net.params());
            CHECK(back.net.config() == net.config());
            const Tensor x = random_input(net, 9);
            const ForwardPass a = net.forward(x), b = back.net.forward(x);
            CHECK(a.reconstruction == b.reconstruction);
            CHECK(a.logits == b.logits);
        }
    }

    TEST_CASE("truncated or corrupted files are format errors") {
        const Network net = build_network(make_config(tiny_preset(), Topology::predictor));
        const std::string bytes = encode_checkpoint(net);
        for (std::size_t cut : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1})
            CHECK_THROWS_AS(decode_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError);
        std::string flipped = bytes;
        flipped[flipped.size() / 2] ^= 0x10;
        CHECK_THROWS_AS(decode_checkpoint(flipped), FormatError);
        std::string wrong_magic = bytes;
        wrong_magic[0] = 'X';
        CHECK_THROWS_AS(decode_checkpoint(wrong_magic), FormatError);
    }

    TEST_CASE("missing file is an io error") {
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
    }

    TEST_CASE("copy_matching_params moves pretrained weights") {
        Network ae = build_network(make_config(tiny_preset(), Topology::autoencoder, FrontEnd::none, 1));
        Network semi = build_network(make_config(tiny_preset(), Topology::semisupervised, FrontEnd::none, 2));
        const std::size_t copied = semi.copy_matching_params(ae);
        CHECK(copied == ae.params().size());
        for (std::size_t id = 0; id < ae.params().size(); ++id) {
            const auto other = semi.params().find(ae.params().name(id));
            REQUIRE(other);
            CHECK(semi.params().value(*other) == ae.params().value(id));
        }
    }
}
