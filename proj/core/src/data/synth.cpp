#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <regex>

#include "stnet/data/clip.hpp"
#include "stnet/error.hpp"
#include "stnet/rng.hpp"

namespace stnet {

void clamp_unit(Tensor& pixels) {
    for (double& v : pixels.data()) v = std::clamp(v, 0.0, 1.0);
}

Example to_example(const Clip& clip) {
    return {clip.pixels.reshaped({1, clip.frames(), clip.height(), clip.width()}), clip.label};
}

std::vector<Example> to_examples(const std::vector<Clip>& clips) {
    std::vector<Example> out;
    out.reserve(clips.size());
    for (const auto& c : clips) out.push_back(to_example(c));
    return out;
}

std::string motion_name(std::size_t class_id) {
    static const char* names[kMotionClasses] = {"up",     "down",     "left",      "right",
                                                "expand", "contract", "rotate-cw", "rotate-ccw"};
    if (class_id >= kMotionClasses) throw ConfigError("motion class " + std::to_string(class_id) + " out of range");
    return names[class_id];
}

Clip synth_gesture_clip(std::size_t class_id, std::uint64_t seed, ClipSize size) {
    if (class_id >= kMotionClasses) throw ConfigError("motion class " + std::to_string(class_id) + " out of range");
    if (size.height < 9 || size.width < 9 || size.frames < 3) throw ConfigError("clip size below 9x9x3");

    const double h = static_cast<double>(size.height);
    const double w = static_cast<double>(size.width);
    const double side = std::min(h, w);
    Rng rng(derive_seed(seed, "gesture"));
    const double cy0 = (h - 1) / 2 + rng.uniform(-0.1, 0.1) * h;
    const double cx0 = (w - 1) / 2 + rng.uniform(-0.1, 0.1) * w;
    const double sigma0 = side * rng.uniform(0.12, 0.16);
    const double theta0 = rng.uniform(0.0, std::numbers::pi);
    const double amplitude = rng.uniform(0.38, 0.42);
    const double elongation = 2.2;
    const double travel = 0.3 * side;

    Tensor pixels({size.frames, size.height, size.width});
    const double last = static_cast<double>(size.frames - 1);
    for (std::size_t t = 0; t < size.frames; ++t) {
        const double p = static_cast<double>(t) / last;
        double cy = cy0, cx = cx0, sigma = sigma0, theta = theta0;
        switch (class_id) {
            case 0: cy -= travel * p; break;
            case 1: cy += travel * p; break;
            case 2: cx -= travel * p; break;
            case 3: cx += travel * p; break;
            case 4: sigma *= 1.0 + 0.6 * p; break;
            case 5: sigma *= 1.0 - 0.4 * p; break;
            case 6: theta -= std::numbers::pi / 2 * p; break;
            default: theta += std::numbers::pi / 2 * p; break;
        }
        const double major = sigma * std::sqrt(elongation);
        const double minor = sigma / std::sqrt(elongation);
        const double c = std::cos(theta), s = std::sin(theta);
        Rng noise(derive_seed(seed, "noise" + std::to_string(t)));
        for (std::size_t y = 0; y < size.height; ++y) {
            for (std::size_t x = 0; x < size.width; ++x) {
                const double dy = static_cast<double>(y) - cy;
                const double dx = static_cast<double>(x) - cx;
                const double u = c * dx + s * dy;
                const double v = -s * dx + c * dy;
                const double blob = amplitude * std::exp(-0.5 * (u * u / (major * major) + v * v / (minor * minor)));
                // dark scene, shot-like noise proportional to intensity
                pixels.at({t, y, x}) = blob * (1.0 + 0.04 * noise.normal());
            }
        }
    }
    clamp_unit(pixels);
    return {std::move(pixels), class_id, motion_name(class_id) + "-" + std::to_string(seed)};
}

IlluminationProfile IlluminationProfile::constant(double c) { return {Kind::constant, c, c, 0.0}; }
IlluminationProfile IlluminationProfile::ramp(double c0, double c1) { return {Kind::ramp, c0, c1, 0.0}; }
IlluminationProfile IlluminationProfile::flicker(double amplitude, double period, double phase) {
    if (!(period > 0.0)) throw ConfigError("flicker period must be > 0");
    return {Kind::flicker, amplitude, period, phase};
}

IlluminationProfile IlluminationProfile::parse(const std::string& text) {
    static const std::regex re(R"(\s*(constant|ramp|flicker)\s*\(([^)]*)\)\s*)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw ConfigError("bad illumination profile '" + text + "'");
    std::vector<double> args;
    std::string list = m[2].str();
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t comma = std::min(list.find(',', pos), list.size());
        const std::string item = list.substr(pos, comma - pos);
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str()) throw ConfigError("bad number in illumination profile '" + text + "'");
        for (; *end; ++end) {
            if (!std::isspace(static_cast<unsigned char>(*end)))
                throw ConfigError("bad number in illumination profile '" + text + "'");
        }
        args.push_back(v);
        pos = comma + 1;
    }
    const std::string kind = m[1].str();
    if (kind == "constant" && args.size() == 1) return constant(args[0]);
    if (kind == "ramp" && args.size() == 2) return ramp(args[0], args[1]);
    if (kind == "flicker" && (args.size() == 2 || args.size() == 3))
        return flicker(args[0], args[1], args.size() == 3 ? args[2] : 0.0);
    throw ConfigError("wrong argument count in illumination profile '" + text + "'");
}

std::vector<double> IlluminationProfile::multipliers(std::size_t frames) const {
    std::vector<double> m(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const double td = static_cast<double>(t);
        switch (kind_) {
            case Kind::constant:
                m[t] = a_;
                break;
            case Kind::ramp:
                m[t] = frames == 1 ? a_ : a_ + (b_ - a_) * td / static_cast<double>(frames - 1);
                break;
            case Kind::flicker:
                m[t] = 1.0 + a_ * std::sin(2.0 * std::numbers::pi * td / b_ + c_);
                break;
        }
        if (!(m[t] > 0.0) || !std::isfinite(m[t])) {
            throw ConfigError("invalid illumination profile " + to_string() + ": multiplier " + std::to_string(m[t]) +
                              " at frame " + std::to_string(t));
        }
    }
    return m;
}

std::string IlluminationProfile::to_string() const {
    char buf[128];
    switch (kind_) {
        case Kind::constant:
            std::snprintf(buf, sizeof buf, "constant(%g)", a_);
            break;
        case Kind::ramp:
            std::snprintf(buf, sizeof buf, "ramp(%g,%g)", a_, b_);
            break;
        case Kind::flicker:
            std::snprintf(buf, sizeof buf, "flicker(%g,%g,%g)", a_, b_, c_);
            break;
    }
    return buf;
}

Clip apply_illumination(const Clip& clip, const IlluminationProfile& profile) {
    const auto m = profile.multipliers(clip.frames());
    Clip out = clip;
    const std::size_t plane = clip.height() * clip.width();
    for (std::size_t t = 0; t < clip.frames(); ++t) {
        for (std::size_t i = 0; i < plane; ++i) {
            double& v = out.pixels[t * plane + i];
            v = std::clamp(v * m[t], 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace stnet
