#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "stnet/data/clip.hpp"
#include "stnet/data/manifest.hpp"
#include "stnet/data/preprocess.hpp"
#include "stnet/data/strip.hpp"
#include "stnet/error.hpp"
#include "stnet/illum/illum.hpp"
#include "support/gen.hpp"

using namespace stnet;
namespace fs = std::filesystem;

namespace {

bool in_unit_range(const Clip& c) {
    return std::all_of(c.pixels.data().begin(), c.pixels.data().end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Clip random_clip(testgen::Gen& g, std::size_t frames, std::size_t side) {
    Clip c{g.tensor({frames, side, side}, 0, 1), std::nullopt, "r"};
    // exact endpoints must survive too
    c.pixels[0] = 0.0;
    c.pixels[c.pixels.size() - 1] = 1.0;
    return c;
}

std::uint32_t crc32(const unsigned char* p, std::size_t n) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        c ^= p[i];
        for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
    }
    return ~c;
}

// Rewrites the IHDR width of a PNG and fixes its checksum.
std::string with_png_width(std::string png, std::uint32_t width) {
    for (int i = 0; i < 4; ++i) png[16 + i] = static_cast<char>((width >> (24 - 8 * i)) & 0xFF);
    const std::uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(png.data()) + 12, 17);
    for (int i = 0; i < 4; ++i) png[29 + i] = static_cast<char>((crc >> (24 - 8 * i)) & 0xFF);
    return png;
}

Manifest numbered(std::size_t n) {
    Manifest m;
    for (std::size_t i = 0; i < n; ++i) m.records.push_back({"clip" + std::to_string(i) + ".png", i % 8, kUnassigned});
    return m;
}

std::size_t count_split(const Manifest& m, const std::string& tag) {
    return static_cast<std::size_t>(
        std::count_if(m.records.begin(), m.records.end(), [&](const ManifestRecord& r) { return r.split == tag; }));
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("stnet_data_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("synth") {
    TEST_CASE("deterministic per class and seed") {
        for (std::size_t k = 0; k < kMotionClasses; ++k) CHECK(synth_gesture_clip(k, 7) == synth_gesture_clip(k, 7));
        CHECK_FALSE(synth_gesture_clip(0, 7) == synth_gesture_clip(0, 8));
    }

    TEST_CASE("pixels stay in [0,1] with the requested shape") {
        testgen::Gen g(101);
        for (int trial = 0; trial < 40; ++trial) {
            const ClipSize size{g.size(9, 20), g.size(9, 20), g.size(3, 12)};
            const Clip c = synth_gesture_clip(g.size(0, 7), g.size(0, 1000000), size);
            CHECK(c.pixels.shape() == Shape{size.frames, size.height, size.width});
            CHECK(in_unit_range(c));
        }
    }

    TEST_CASE("classes share frame 0 and diverge later") {
        const Clip up = synth_gesture_clip(0, 42), down = synth_gesture_clip(1, 42);
        const std::size_t plane = 33 * 33;
        double first = 0, last = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            first = std::max(first, std::abs(up.pixels[i] - down.pixels[i]));
            last = std::max(last, std::abs(up.pixels[8 * plane + i] - down.pixels[8 * plane + i]));
        }
        CHECK(first < 1e-12);
        CHECK(last > 0.1);
    }

    TEST_CASE("class names and range") {
        CHECK(motion_name(0) == "up");
        CHECK(motion_name(7) == "rotate-ccw");
        CHECK_THROWS_AS(synth_gesture_clip(8, 1), ConfigError);
        CHECK_THROWS_AS(synth_gesture_clip(0, 1, ClipSize{8, 9, 3}), ConfigError);
    }
}

TEST_SUITE("illumination profiles") {
    TEST_CASE("constant(1) is the identity and constant(2) doubles") {
        const Clip c = synth_gesture_clip(3, 5);
        CHECK(apply_illumination(c, IlluminationProfile::constant(1)) == c);
        Clip flat{Tensor({2, 9, 9}, 0.3), std::size_t{4}, "f"};
        const Clip twice = apply_illumination(flat, IlluminationProfile::constant(2));
        for (double v : twice.pixels.data()) CHECK(v == doctest::Approx(0.6));
        CHECK(twice.label == flat.label);
    }

    TEST_CASE("ramp interpolates linearly over the frames") {
        const auto m = IlluminationProfile::ramp(0.5, 1.5).multipliers(9);
        REQUIRE(m.size() == 9);
        for (std::size_t t = 0; t < 9; ++t) CHECK(m[t] == doctest::Approx(0.5 + static_cast<double>(t) / 8.0));
    }

    TEST_CASE("results are clamped") {
        Clip bright{Tensor({1, 9, 9}, 0.8), std::nullopt, "b"};
        const Clip out = apply_illumination(bright, IlluminationProfile::constant(3));
        for (double v : out.pixels.data()) CHECK(v == 1.0);
    }

    TEST_CASE("nonpositive multipliers are rejected") {
        CHECK_THROWS_AS(IlluminationProfile::constant(0).multipliers(3), ConfigError);
        CHECK_THROWS_AS(IlluminationProfile::ramp(-1, 1).multipliers(9), ConfigError);
        CHECK_THROWS_AS(IlluminationProfile::flicker(1.5, 4).multipliers(9), ConfigError);
    }

    TEST_CASE("text form round trip") {
        for (const char* text : {"constant(2)", "ramp(0.5,1.5)", "flicker(0.3,4,0)"}) {
            const auto p = IlluminationProfile::parse(text);
            CHECK(IlluminationProfile::parse(p.to_string()).multipliers(9) == p.multipliers(9));
        }
        CHECK(IlluminationProfile::parse("ramp(0.5,1.5)").kind() == IlluminationProfile::Kind::ramp);
        CHECK_THROWS_AS(IlluminationProfile::parse("ramp(1)"), ConfigError);
        CHECK_THROWS_AS(IlluminationProfile::parse("sunset(2)"), ConfigError);
    }

    TEST_CASE("illum output moves toward the unlit output as beta shrinks") {
        const Clip c = synth_gesture_clip(4, 9);
        const Tensor mix = moving_average_weights(9, 3);
        for (double level : {0.5, 2.0}) {
            const Clip lit = apply_illumination(c, IlluminationProfile::constant(level));
            double previous = 1e300;
            for (double beta : {1e-1, 1e-3, 1e-5, 1e-8}) {
                const IllumParams p{1.0, beta, 1.0, 0.0, mix};
                const Tensor a = illum_forward(lit.pixels, p), b = illum_forward(c.pixels, p);
                double d = 0;
                for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
                CHECK(d <= previous);
                previous = d;
            }
        }
    }
}

TEST_SUITE("strip") {
    TEST_CASE("desk and paper clip geometry") {
        const std::string bytes = encode_strip(synth_gesture_clip(0, 1));
        // IHDR width and height, big-endian
        const auto u32 = [&](std::size_t at) {
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
            return v;
        };
        CHECK(u32(16) == 297);
        CHECK(u32(20) == 33);
        const Clip paper = decode_strip(encode_strip(Clip{Tensor({9, 145, 145}, 0.5), std::nullopt, "p"}));
        CHECK(paper.pixels.shape() == Shape{9, 145, 145});
    }

    TEST_CASE("round trip error is within 1/65535 on 1000 random clips") {
        testgen::Gen g(111);
        double worst = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const Clip c = random_clip(g, g.size(1, 9), g.size(1, 12));
            const Clip back = decode_strip(encode_strip(c));
            REQUIRE(back.pixels.shape() == c.pixels.shape());
            for (std::size_t i = 0; i < c.pixels.size(); ++i)
                worst = std::max(worst, std::abs(back.pixels[i] - c.pixels[i]));
            // quantized clips survive a second pass unchanged
            CHECK(decode_strip(encode_strip(back)) == back);
        }
        CHECK(worst <= 1.0 / 65535.0);
    }

    TEST_CASE("write and read through a file") {
        TempDir dir;
        const Clip c = synth_gesture_clip(2, 3);
        const std::string path = (dir.path / "clip.png").string();
        strip_write(c, path);
        const Clip back = strip_read(path);
        for (std::size_t i = 0; i < c.pixels.size(); ++i) CHECK(std::abs(back.pixels[i] - c.pixels[i]) <= 1.0 / 65535.0);
        CHECK_THROWS_AS(strip_read((dir.path / "missing.png").string()), IoError);
    }

    TEST_CASE("non-square frames and bad files") {
        CHECK_THROWS_AS(encode_strip(Clip{Tensor({2, 3, 4}), std::nullopt, "x"}), FormatError);
        CHECK_THROWS_AS(decode_strip("definitely not a png"), FormatError);
        const std::string good = encode_strip(Clip{Tensor({2, 3, 3}, 0.25), std::nullopt, "x"});
        CHECK_THROWS_AS(decode_strip(with_png_width(good, 7)), FormatError);
        CHECK_THROWS_AS(decode_strip(good.substr(0, good.size() / 2)), FormatError);
    }
}

TEST_SUITE("preprocess") {
    TEST_CASE("every third frame when there are enough") {
        CHECK(temporal_indices(27) == std::vector<std::size_t>{0, 3, 6, 9, 12, 15, 18, 21, 24});
        CHECK(temporal_indices(25) == std::vector<std::size_t>{0, 3, 6, 9, 12, 15, 18, 21, 24});
        CHECK(temporal_indices(9) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
        CHECK(temporal_indices(17) == std::vector<std::size_t>{0, 2, 4, 6, 8, 10, 12, 14, 16});
        CHECK_THROWS_AS(temporal_indices(8), ConfigError);
    }

    TEST_CASE("fallback spacing is strictly increasing and spans the clip") {
        for (std::size_t f = 9; f < 25; ++f) {
            const auto idx = temporal_indices(f);
            REQUIRE(idx.size() == 9);
            CHECK(idx.front() == 0);
            CHECK(idx.back() == f - 1);
            for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
        }
    }

    TEST_CASE("bicubic resize keeps constants and same-size frames") {
        testgen::Gen g(121);
        const Tensor flat({7, 7}, 0.4);
        const Tensor up = bicubic_resize(flat, 15, 15);
        for (double v : up.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
        const Tensor f = g.tensor({6, 5}, 0, 1);
        CHECK(bicubic_resize(f, 6, 5) == f);
        const Tensor down = bicubic_resize(g.tensor({40, 40}, 0, 1), 33, 33);
        CHECK(down.shape() == Shape{33, 33});
        for (double v : down.data()) CHECK((v >= 0.0 && v <= 1.0));
    }

    TEST_CASE("temporal subsample picks and resizes") {
        std::vector<Tensor> frames;
        for (std::size_t t = 0; t < 27; ++t) frames.emplace_back(Shape{10, 10}, static_cast<double>(t) / 27.0);
        const Clip c = temporal_subsample(frames, 9, 5);
        CHECK(c.pixels.shape() == Shape{9, 5, 5});
        for (std::size_t t = 0; t < 9; ++t)
            CHECK(c.pixels.at({t, 2, 2}) == doctest::Approx(static_cast<double>(3 * t) / 27.0));
    }

    TEST_CASE("augment") {
        const Clip c = synth_gesture_clip(5, 17);
        const auto flipped = augment(c, {AugmentOp::hflip()});
        REQUIRE(flipped.size() == 2);
        CHECK(flipped[0] == c);
        CHECK(augment(flipped[1], {AugmentOp::hflip()})[1].pixels == c.pixels);
        const auto still = augment(c, {AugmentOp::rotate(0)});
        for (std::size_t i = 0; i < c.pixels.size(); ++i) CHECK(std::abs(still[1].pixels[i] - c.pixels[i]) < 1e-12);
        Clip labeled = c;
        labeled.label = 5;
        const auto three = augment(labeled, {AugmentOp::hflip(), AugmentOp::rotate(10), AugmentOp::translate(2, -1)});
        CHECK(three.size() == 4);
        for (const auto& a : three) {
            CHECK(a.label == labeled.label);
            CHECK(in_unit_range(a));
        }
    }

    TEST_CASE("integer translation shifts every frame and fills with zero") {
        testgen::Gen g(122);
        const Clip c{g.tensor({3, 10, 10}, 0.1, 1), std::nullopt, "t"};
        const Clip s = augment(c, {AugmentOp::translate(1, 0)})[1];
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t y = 0; y < 10; ++y) {
                CHECK(s.pixels.at({t, y, 0}) == 0.0);
                for (std::size_t x = 1; x < 10; ++x)
                    CHECK(s.pixels.at({t, y, x}) == doctest::Approx(c.pixels.at({t, y, x - 1})).epsilon(1e-12));
            }
    }

    TEST_CASE("augment limits") {
        const Clip c = synth_gesture_clip(0, 1);
        CHECK_THROWS_AS(augment(c, {AugmentOp::rotate(20)}), ConfigError);
        CHECK_THROWS_AS(augment(c, {AugmentOp::translate(4, 0)}), ConfigError);
        CHECK_NOTHROW(augment(c, {AugmentOp::translate(3, 3)}));
    }
}

TEST_SUITE("manifest") {
    TEST_CASE("split counts") {
        const SplitCounts hundred = split_counts(100);
        CHECK(hundred.train == 50);
        CHECK(hundred.test == 30);
        CHECK(hundred.validation == 20);
        const SplitCounts odd = split_counts(103);
        CHECK(odd.train == 53);
        CHECK(odd.test == 30);
        CHECK(odd.validation == 20);
    }

    TEST_CASE("split tags partition the records deterministically") {
        testgen::Gen g(131);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = g.size(10, 300);
            const std::uint64_t seed = g.size(0, 1000);
            const Manifest split = split_dataset(numbered(n), seed);
            CHECK(split == split_dataset(numbered(n), seed));
            REQUIRE(split.records.size() == n);
            const SplitCounts want = split_counts(n);
            CHECK(count_split(split, kTrain) == want.train);
            CHECK(count_split(split, kTest) == want.test);
            CHECK(count_split(split, kValidation) == want.validation);
            CHECK(want.train + want.test + want.validation == n);
            std::set<std::string> paths;
            for (const auto& r : split.records) paths.insert(r.path);
            CHECK(paths.size() == n);
        }
    }

    TEST_CASE("too few records") {
        CHECK_THROWS_AS(split_dataset(numbered(9), 1), ConfigError);
    }

    TEST_CASE("text round trip") {
        Manifest m = split_dataset(numbered(12), 3);
        m.records.push_back({"u.png", std::nullopt, kTrain});
        CHECK(parse_manifest(format_manifest(m)) == m);
        CHECK(format_manifest(m).find("u.png,-,train") != std::string::npos);
        CHECK_THROWS_AS(parse_manifest("a.png,3\n"), FormatError);
        CHECK_THROWS_AS(parse_manifest("a.png,x,train\n"), FormatError);
        CHECK_THROWS_AS(parse_manifest("a.png,1,train\na.png,2,test\n"), FormatError);
        CHECK_THROWS_AS(parse_manifest("a.png,1,holdout\n"), FormatError);
    }

    TEST_CASE("load clips relative to the manifest directory") {
        TempDir dir;
        Manifest m;
        for (std::size_t k = 0; k < 3; ++k) {
            const std::string name = "c" + std::to_string(k) + ".png";
            strip_write(synth_gesture_clip(k, 1), (dir.path / name).string());
            m.records.push_back({name, k, kTest});
        }
        write_manifest((dir.path / "manifest.csv").string(), m);
        const Manifest back = read_manifest((dir.path / "manifest.csv").string());
        CHECK(back == m);
        const auto clips = load_clips(back.with_split(kTest), dir.path.string());
        REQUIRE(clips.size() == 3);
        CHECK(clips[2].label == std::size_t{2});
        CHECK(clips[0].pixels.shape() == Shape{9, 33, 33});
    }
}
