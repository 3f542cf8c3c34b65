#pragma once

// Small seeded generators for property tests.

#include <cstddef>
#include <cstdint>

#include "stnet/rng.hpp"
#include "stnet/tensor.hpp"

namespace testgen {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t size(std::size_t lo, std::size_t hi) { return lo + rng_.below(hi - lo + 1); }
    double real(double lo, double hi) { return rng_.uniform(lo, hi); }
    bool coin() { return rng_.below(2) == 1; }

    stnet::Shape shape(std::size_t rank, std::size_t lo, std::size_t hi) {
        stnet::Shape s(rank);
        for (auto& e : s) e = size(lo, hi);
        return s;
    }

    stnet::Tensor tensor(const stnet::Shape& shape, double lo, double hi) {
        stnet::Tensor t(shape);
        for (double& v : t.data()) v = real(lo, hi);
        return t;
    }

    /// Values bounded away from zero, for tests that must avoid kinks.
    stnet::Tensor tensor_off_zero(const stnet::Shape& shape, double lo, double hi, double gap) {
        stnet::Tensor t(shape);
        for (double& v : t.data()) {
            do v = real(lo, hi);
            while (v > -gap && v < gap);
        }
        return t;
    }

private:
    stnet::Rng rng_;
};

}  // namespace testgen
