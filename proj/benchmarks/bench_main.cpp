#include <benchmark/benchmark.h>

#include "stnet/data/clip.hpp"
#include "stnet/illum/illum.hpp"
#include "stnet/layers/conv.hpp"
#include "stnet/model/network.hpp"
#include "stnet/rng.hpp"

using namespace stnet;

namespace {

// First encoder layer at desk scale: 9 frames of 33x33.
const ConvSpec kFirstConv{16, 5, 3, 2, 1, 0};

void BM_Conv3dForward(benchmark::State& state) {
    const Tensor x = fill_random({1, 9, 33, 33}, 1, UniformDist{0, 1});
    const Tensor k = fill_random(conv_kernel_shape(kFirstConv, 1), 2, UniformDist{-0.1, 0.1});
    for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, k, kFirstConv));
}
BENCHMARK(BM_Conv3dForward);

void BM_Conv3dBackward(benchmark::State& state) {
    const Tensor x = fill_random({1, 9, 33, 33}, 1, UniformDist{0, 1});
    const Tensor k = fill_random(conv_kernel_shape(kFirstConv, 1), 2, UniformDist{-0.1, 0.1});
    const Tensor g = fill_random(conv3d_output_shape(x.shape(), kFirstConv), 3, UniformDist{-1, 1});
    for (auto _ : state) benchmark::DoNotOptimize(conv3d_backward(x, k, g, kFirstConv));
}
BENCHMARK(BM_Conv3dBackward);

void BM_IllumForward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const Tensor x = fill_random({1, 9, side, side}, 4, UniformDist{0.01, 1});
    const IllumParams p{1.0, 1e-6, 1.0, 0.0, moving_average_weights(9, 3)};
    for (auto _ : state) benchmark::DoNotOptimize(illum_forward(x, p));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_IllumForward)->Arg(33)->Arg(145);

void network_step(benchmark::State& state, Topology topology, FrontEnd front) {
    const Network net = build_network(make_config(desk_preset(), topology, front, 5));
    const Example e = to_example(synth_gesture_clip(2, 6));
    for (auto _ : state) {
        const ForwardPass pass = net.forward(e.input, e.label);
        Gradients grads = net.params().zero_grads();
        net.backward(pass, grads);
        benchmark::DoNotOptimize(grads);
    }
}

void BM_NetworkForward(benchmark::State& state) {
    const Network net = build_network(make_config(desk_preset(), Topology::semisupervised, FrontEnd::illum, 5));
    const Example e = to_example(synth_gesture_clip(2, 6));
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(e.input, e.label));
}
BENCHMARK(BM_NetworkForward);

void BM_SemisupStep(benchmark::State& state) { network_step(state, Topology::semisupervised, FrontEnd::illum); }
BENCHMARK(BM_SemisupStep);

void BM_PredictorStep(benchmark::State& state) { network_step(state, Topology::predictor, FrontEnd::none); }
BENCHMARK(BM_PredictorStep);

}  // namespace

BENCHMARK_MAIN();
