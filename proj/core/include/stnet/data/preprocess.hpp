#pragma once

#include <cstddef>
#include <vector>

#include "stnet/data/clip.hpp"

namespace stnet {

/// Every third frame from 0 when there are enough frames, otherwise
/// round(linspace(0, F-1, target)). Throws ConfigError when F < target.
std::vector<std::size_t> temporal_indices(std::size_t frame_count, std::size_t target = 9);

/// Bicubic (Keys, a = -0.5) resize of one [h,w] frame, clamped to [0,1].
Tensor bicubic_resize(const Tensor& frame, std::size_t out_height, std::size_t out_width);

/// Picks `target` frames and resizes each to side x side (0 keeps the size).
Clip temporal_subsample(const std::vector<Tensor>& frames, std::size_t target = 9, std::size_t side = 0);

struct AugmentOp {
    enum class Kind { rotate, translate, hflip };
    Kind kind = Kind::hflip;
    double degrees = 0.0;
    double dx = 0.0;
    double dy = 0.0;

    static AugmentOp rotate(double degrees) { return {Kind::rotate, degrees, 0.0, 0.0}; }
    static AugmentOp translate(double dx, double dy) { return {Kind::translate, 0.0, dx, dy}; }
    static AugmentOp hflip() { return {Kind::hflip, 0.0, 0.0, 0.0}; }
};

struct AugmentLimits {
    double max_degrees = 15.0;
    /// Fraction of the frame side.
    double max_shift = 0.1;
};

/// The original followed by one transformed copy per op. Every frame gets
/// the same transform; pixels from outside the frame are 0.
std::vector<Clip> augment(const Clip& clip, const std::vector<AugmentOp>& ops, const AugmentLimits& limits = {});

}  // namespace stnet
