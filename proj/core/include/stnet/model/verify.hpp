#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stnet {

/// Result of comparing one analytic backward pass against central
/// differences.
struct GradCheckRow {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t compared = 0;
    /// Elements skipped because a kink (ReLU, Abs) lies within the probe.
    std::size_t excluded = 0;

    bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kLayerGradTolerance = 1e-5;
inline constexpr double kNetworkGradTolerance = 1e-4;
/// Inputs this close to a kink are left out of the comparison.
inline constexpr double kKinkMargin = 1e-4;

/// conv3d, deconv3d, fc, relu, lrn, abs, log, exp, prod, softmax_ce,
/// euclidean, temporal_mix, illum.
const std::vector<std::string>& layer_check_names();

/// Checks every gradient of one layer on seeded random data. `perturb`
/// scales the analytic gradient by (1 + perturb) to prove the harness
/// notices a broken backward. Unknown names raise ConfigError.
GradCheckRow check_layer_gradients(const std::string& name, std::uint64_t seed, double perturb = 0.0);

/// End-to-end check of every parameter of the tiny semi-supervised network
/// with the illumination front-end, on a labeled clip with both loss terms
/// active. Biases start at small random values so no unit sits exactly on
/// its kink.
GradCheckRow check_network_gradients(std::uint64_t seed, double perturb = 0.0);

}  // namespace stnet
