#include "stnet/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "stnet/error.hpp"

namespace stnet {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw ConfigError("Rng::below requires n >= 1");
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw;
    do {
        draw = engine_();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % n);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = base ^ (tag + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(base, h);
}

Tensor fill_random(const Shape& shape, std::uint64_t seed, const InitDist& dist) {
    if (shape.empty()) throw ShapeError("fill_random: empty shape");
    Tensor out(shape);
    Rng rng(seed);
    double lo = 0.0;
    double hi = 0.0;
    if (const auto* u = std::get_if<UniformDist>(&dist)) {
        lo = u->lo;
        hi = u->hi;
    } else {
        const auto& f = std::get<ScaledFanDist>(dist);
        if (f.fan_in < 1 || f.fan_out < 1) throw ConfigError("fill_random: fan_in and fan_out must be >= 1");
        hi = std::sqrt(6.0 / static_cast<double>(f.fan_in + f.fan_out));
        lo = -hi;
    }
    for (double& v : out.data()) v = rng.uniform(lo, hi);
    return out;
}

}  // namespace stnet
