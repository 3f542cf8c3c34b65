#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <variant>

#include "stnet/tensor.hpp"

namespace stnet {

/// Seeded generator with a platform-independent output stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mixes a base seed with a stream tag (clip id, layer name, ...).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

struct UniformDist {
    double lo;
    double hi;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
struct ScaledFanDist {
    std::size_t fan_in;
    std::size_t fan_out;
};

using InitDist = std::variant<UniformDist, ScaledFanDist>;

Tensor fill_random(const Shape& shape, std::uint64_t seed, const InitDist& dist);

/// In-place Fisher-Yates shuffle driven by rng.
template <typename Container>
void shuffle(Container& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace stnet
