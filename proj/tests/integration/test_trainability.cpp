#include <vector>

#include "doctest.h"
#include "stnet/data/clip.hpp"
#include "stnet/model/train.hpp"
#include "stnet/rng.hpp"

using namespace stnet;

namespace {

std::vector<Example> gestures(std::size_t n, std::uint64_t seed) {
    std::vector<Clip> clips;
    for (std::size_t i = 0; i < n; ++i) clips.push_back(synth_gesture_clip(i % kMotionClasses, derive_seed(seed, i)));
    return to_examples(clips);
}

}  // namespace

TEST_CASE("desk predictor learns the synthetic gestures") {
    const auto train = gestures(200, 1001);
    const auto held_out = gestures(100, 2002);
    Network net = build_network(make_config(desk_preset(), Topology::predictor, FrontEnd::none, 1));
    SgdConfig sgd;
    sgd.learning_rate = 0.005;
    sgd.batch_size = 4;
    sgd.max_epochs = 30;
    train_semisupervised(net, train, {}, LossSchedule{}, sgd);
    const double accuracy = evaluate(net, held_out).accuracy;
    MESSAGE("held-out accuracy " << accuracy);
    CHECK(accuracy > 0.8);
}
