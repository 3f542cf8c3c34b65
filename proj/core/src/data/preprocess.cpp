#include "stnet/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stnet/error.hpp"

namespace stnet {

std::vector<std::size_t> temporal_indices(std::size_t frame_count, std::size_t target) {
    if (target == 0) throw ConfigError("target frame count must be >= 1");
    if (frame_count < target) {
        throw ConfigError("insufficient frames: " + std::to_string(frame_count) + " < " + std::to_string(target));
    }
    std::vector<std::size_t> idx(target);
    if (frame_count >= 3 * (target - 1) + 1) {
        for (std::size_t i = 0; i < target; ++i) idx[i] = 3 * i;
        return idx;
    }
    if (target == 1) return {0};
    const double step = static_cast<double>(frame_count - 1) / static_cast<double>(target - 1);
    for (std::size_t i = 0; i < target; ++i) idx[i] = static_cast<std::size_t>(std::lround(step * static_cast<double>(i)));
    return idx;
}

namespace {

double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

}  // namespace

Tensor bicubic_resize(const Tensor& frame, std::size_t out_height, std::size_t out_width) {
    if (frame.rank() != 2) throw ShapeError("bicubic_resize expects a [h,w] frame");
    if (out_height == 0 || out_width == 0) throw ShapeError("resize target must be nonzero");
    const std::size_t h = frame.extent(0), w = frame.extent(1);
    if (h == out_height && w == out_width) return frame;
    const double sy = static_cast<double>(h) / static_cast<double>(out_height);
    const double sx = static_cast<double>(w) / static_cast<double>(out_width);
    auto sample = [&](long y, long x) {
        y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
        x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
        return frame[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    Tensor out({out_height, out_width});
    for (std::size_t oy = 0; oy < out_height; ++oy) {
        const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
        const long y0 = static_cast<long>(std::floor(fy));
        for (std::size_t ox = 0; ox < out_width; ++ox) {
            const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            const long x0 = static_cast<long>(std::floor(fx));
            double acc = 0.0;
            for (long j = -1; j <= 2; ++j) {
                const double wy = cubic_weight(fy - static_cast<double>(y0 + j));
                for (long i = -1; i <= 2; ++i) {
                    acc += wy * cubic_weight(fx - static_cast<double>(x0 + i)) * sample(y0 + j, x0 + i);
                }
            }
            out[oy * out_width + ox] = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

Clip temporal_subsample(const std::vector<Tensor>& frames, std::size_t target, std::size_t side) {
    const auto idx = temporal_indices(frames.size(), target);
    const Shape first = frames.front().shape();
    if (first.size() != 2) throw ShapeError("frames must be [h,w]");
    const std::size_t oh = side ? side : first[0];
    const std::size_t ow = side ? side : first[1];
    Clip clip;
    clip.pixels = Tensor({target, oh, ow});
    for (std::size_t k = 0; k < target; ++k) {
        const Tensor& f = frames[idx[k]];
        if (f.shape() != first) throw ShapeError("frames differ in size");
        const Tensor r = bicubic_resize(f, oh, ow);
        std::copy(r.values().begin(), r.values().end(), clip.pixels.data().begin() + static_cast<long>(k * oh * ow));
    }
    return clip;
}

namespace {

/// Inverse-maps each output pixel through `source` and samples bilinearly.
template <class Map>
Clip resample(const Clip& clip, Map source) {
    Clip out = clip;
    const std::size_t h = clip.height(), w = clip.width();
    for (std::size_t t = 0; t < clip.frames(); ++t) {
        const double* in = clip.pixels.data().data() + t * h * w;
        auto pix = [&](long y, long x) {
            if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
            return in[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
        };
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const auto [sy, sx] = source(static_cast<double>(y), static_cast<double>(x));
                const long y0 = static_cast<long>(std::floor(sy));
                const long x0 = static_cast<long>(std::floor(sx));
                const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
                double v = (1 - fy) * (1 - fx) * pix(y0, x0);
                if (fx != 0.0) v += (1 - fy) * fx * pix(y0, x0 + 1);
                if (fy != 0.0) v += fy * (1 - fx) * pix(y0 + 1, x0);
                if (fx != 0.0 && fy != 0.0) v += fy * fx * pix(y0 + 1, x0 + 1);
                out.pixels[(t * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Clip> augment(const Clip& clip, const std::vector<AugmentOp>& ops, const AugmentLimits& limits) {
    std::vector<Clip> out{clip};
    const double side = static_cast<double>(std::min(clip.height(), clip.width()));
    const double cy = (static_cast<double>(clip.height()) - 1) / 2;
    const double cx = (static_cast<double>(clip.width()) - 1) / 2;
    for (const auto& op : ops) {
        switch (op.kind) {
            case AugmentOp::Kind::hflip: {
                Clip f = clip;
                const std::size_t h = clip.height(), w = clip.width();
                for (std::size_t t = 0; t < clip.frames(); ++t)
                    for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t x = 0; x < w; ++x)
                            f.pixels[(t * h + y) * w + x] = clip.pixels[(t * h + y) * w + (w - 1 - x)];
                out.push_back(std::move(f));
                break;
            }
            case AugmentOp::Kind::rotate: {
                if (std::abs(op.degrees) > limits.max_degrees) throw ConfigError("rotation exceeds the limit");
                const double rad = op.degrees * std::numbers::pi / 180.0;
                const double c = std::cos(rad), s = std::sin(rad);
                out.push_back(resample(clip, [&](double y, double x) {
                    const double dy = y - cy, dx = x - cx;
                    return std::pair{cy + c * dy - s * dx, cx + s * dy + c * dx};
                }));
                break;
            }
            case AugmentOp::Kind::translate: {
                const double limit = limits.max_shift * side;
                if (std::abs(op.dx) > limit || std::abs(op.dy) > limit) throw ConfigError("translation exceeds the limit");
                out.push_back(resample(clip, [&](double y, double x) { return std::pair{y - op.dy, x - op.dx}; }));
                break;
            }
        }
    }
    return out;
}

}  // namespace stnet
