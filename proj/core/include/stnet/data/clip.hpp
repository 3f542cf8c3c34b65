#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stnet/model/train.hpp"
#include "stnet/tensor.hpp"

namespace stnet {

/// Grayscale frames [frames,height,width] with values in [0,1].
struct Clip {
    Tensor pixels;
    std::optional<std::size_t> label;
    std::string id;

    std::size_t frames() const { return pixels.extent(0); }
    std::size_t height() const { return pixels.extent(1); }
    std::size_t width() const { return pixels.extent(2); }

    friend bool operator==(const Clip&, const Clip&) = default;
};

/// Clamps every pixel into [0,1].
void clamp_unit(Tensor& pixels);

/// Adds the leading channel axis the networks expect.
Example to_example(const Clip& clip);
std::vector<Example> to_examples(const std::vector<Clip>& clips);

inline constexpr std::size_t kMotionClasses = 8;

struct ClipSize {
    std::size_t height = 33;
    std::size_t width = 33;
    std::size_t frames = 9;
};

/// up, down, left, right, expand, contract, rotate-cw, rotate-ccw
std::string motion_name(std::size_t class_id);

/// An elongated Gaussian blob on a dark scene whose motion encodes the
/// class. Sensor noise is proportional to intensity. Start position, scale,
/// orientation and noise depend on the seed only, so clips of different
/// classes with one seed share frame 0.
Clip synth_gesture_clip(std::size_t class_id, std::uint64_t seed, ClipSize size = {});

class IlluminationProfile {
public:
    enum class Kind { constant, ramp, flicker };

    static IlluminationProfile constant(double c);
    static IlluminationProfile ramp(double c0, double c1);
    static IlluminationProfile flicker(double amplitude, double period, double phase = 0.0);
    /// "constant(2)", "ramp(0.5,1.5)", "flicker(0.3,4,0)".
    static IlluminationProfile parse(const std::string& text);

    Kind kind() const noexcept { return kind_; }
    /// Per-frame multipliers; throws ConfigError unless all are positive.
    std::vector<double> multipliers(std::size_t frames) const;
    std::string to_string() const;

private:
    IlluminationProfile(Kind kind, double a, double b, double c) : kind_(kind), a_(a), b_(b), c_(c) {}
    Kind kind_;
    double a_, b_, c_;
};

/// Frame t scaled by m_t, then clamped to [0,1].
Clip apply_illumination(const Clip& clip, const IlluminationProfile& profile);

}  // namespace stnet
