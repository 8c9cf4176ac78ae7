#include <doctest.h>

#include <cmath>
#include <random>

#include "asbox/errors.hpp"
#include "asbox/perception.hpp"

using namespace asbox;

namespace {

Stimulus random_image(std::mt19937_64& rng, std::int64_t w, std::int64_t h, std::int64_t ch, std::int64_t depth) {
    Bytes p(static_cast<std::size_t>(w * h * ch * depth / 8));
    for (auto& b : p) b = static_cast<std::uint8_t>(rng());
    return make_image(w, h, ch, depth, std::move(p));
}

double channel_mean(const Stimulus& s, std::int64_t c) {
    double sum = 0;
    for (std::int64_t y = 0; y < s.height; ++y)
        for (std::int64_t x = 0; x < s.width; ++x) sum += s.sample(x, y, c);
    return sum / static_cast<double>(s.pixel_count());
}

// Output pixel value computed from real-valued box overlaps.
double reference_pixel(const Stimulus& in, std::int64_t out_w, std::int64_t out_h, std::int64_t ox, std::int64_t oy,
                       std::int64_t c) {
    double sx = static_cast<double>(in.width) / static_cast<double>(out_w);
    double sy = static_cast<double>(in.height) / static_cast<double>(out_h);
    double x0 = ox * sx, x1 = (ox + 1) * sx, y0 = oy * sy, y1 = (oy + 1) * sy;
    double acc = 0;
    for (auto y = static_cast<std::int64_t>(std::floor(y0)); y < static_cast<std::int64_t>(std::ceil(y1)); ++y) {
        double wy = std::min<double>(y1, y + 1) - std::max<double>(y0, y);
        for (auto x = static_cast<std::int64_t>(std::floor(x0)); x < static_cast<std::int64_t>(std::ceil(x1)); ++x) {
            double wx = std::min<double>(x1, x + 1) - std::max<double>(x0, x);
            acc += wx * wy * in.sample(x, y, c);
        }
    }
    return acc / (sx * sy);
}

}  // namespace

TEST_CASE("reference sizes") {
    std::mt19937_64 rng(1);
    auto big = random_image(rng, 750, 500, 1, 8);
    auto out = downscale(big);
    CHECK(out.width == 75);
    CHECK(out.height == 50);

    auto mnist = random_image(rng, 28, 28, 1, 8);
    CHECK(downscale(mnist) == mnist);
}

TEST_CASE("uniform gray is a fixed point") {
    auto gray = make_image(300, 200, 1, 8, Bytes(300 * 200, 137));
    auto out = downscale(gray);
    CHECK(out.width == 75);
    CHECK(out.height == 50);
    for (auto v : out.payload) CHECK(v == 137);
}

TEST_CASE("box filter matches real-valued overlaps") {
    std::mt19937_64 rng(2);
    for (auto [w, h] : {std::pair<std::int64_t, std::int64_t>{161, 97}, {300, 7}, {76, 51}, {1000, 1000}}) {
        for (std::int64_t ch : {1, 3}) {
            auto in = random_image(rng, w, h, ch, 8);
            auto out = downscale(in);
            for (std::int64_t y = 0; y < out.height; ++y)
                for (std::int64_t x = 0; x < out.width; ++x)
                    for (std::int64_t c = 0; c < ch; ++c) {
                        double ref = reference_pixel(in, out.width, out.height, x, y, c);
                        CHECK(std::fabs(out.sample(x, y, c) - ref) <= 0.5 + 1e-6);
                    }
        }
    }
}

TEST_CASE("size, aspect, mean and idempotence properties") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 40; ++i) {
        std::int64_t w = 1 + static_cast<std::int64_t>(rng() % 400);
        std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 400);
        std::int64_t depth = rng() % 4 == 0 ? 16 : 8;
        std::int64_t ch = rng() % 2 == 0 ? 1 : 3;
        auto in = random_image(rng, w, h, ch, depth);
        auto out = downscale(in);
        CAPTURE(w);
        CAPTURE(h);
        CHECK(out.width <= 75);
        CHECK(out.height <= 50);
        CHECK(out.complexity_bits() <= in.complexity_bits());
        if (w > 75 || h > 50) {
            CHECK(out.complexity_bits() < in.complexity_bits());
            double s = std::min(75.0 / static_cast<double>(w), 50.0 / static_cast<double>(h));
            CHECK(std::fabs(static_cast<double>(out.width) - static_cast<double>(w) * s) <= 1.0);
            CHECK(std::fabs(static_cast<double>(out.height) - static_cast<double>(h) * s) <= 1.0);
        }
        for (std::int64_t c = 0; c < ch; ++c) CHECK(std::fabs(channel_mean(out, c) - channel_mean(in, c)) <= 0.5);
        CHECK(downscale(out) == out);
    }
}

TEST_CASE("glance cap is checked before the payload") {
    Stimulus huge;
    huge.width = 100'000;
    huge.height = 100'000;
    huge.channels = 3;
    huge.depth = 16;
    // No payload at all: the cap must fire first.
    CHECK_THROWS_AS(downscale(huge), GlanceCapExceeded);

    auto small = make_image(10, 10, 1, 8, Bytes(100, 0));
    CHECK_THROWS_AS(downscale(small, 75, 50, 799), GlanceCapExceeded);
    CHECK_NOTHROW(downscale(small, 75, 50, 800));
}

TEST_CASE("invalid stimuli") {
    CHECK_THROWS_AS(make_image(2, 2, 1, 8, Bytes(3)), InvalidStimulus);
    CHECK_THROWS_AS(make_image(2, 2, 1, 12, Bytes(6)), InvalidStimulus);
    CHECK_THROWS_AS(make_image(0, 2, 1, 8, Bytes{}), InvalidStimulus);
}

TEST_CASE("raw stimuli are never resized") {
    auto raw = make_raw_stimulus(to_bytes(std::string(10'000, 'x')));
    CHECK(raw.complexity_bits() == 80'000);
    CHECK(downscale(raw) == raw);
}

TEST_CASE("PNM round trips") {
    std::mt19937_64 rng(4);
    for (std::int64_t ch : {1, 3}) {
        for (std::int64_t depth : {8, 16}) {
            auto img = random_image(rng, 13, 9, ch, depth);
            CHECK(parse_pnm(encode_pnm(img)) == img);
        }
    }
    auto ascii = parse_pnm("P2\n# comment\n3 2\n255\n0 1 2\n3 4 255\n");
    CHECK(ascii.width == 3);
    CHECK(ascii.sample(2, 1, 0) == 255);
    auto color = parse_pnm("P3 1 1 255 10 20 30");
    CHECK(color.channels == 3);
    CHECK(color.sample(0, 0, 1) == 20);
    CHECK_THROWS_AS(parse_pnm("P7 1 1 255"), InvalidStimulus);
    CHECK_THROWS_AS(parse_pnm("P5 2 2 255\nab"), InvalidStimulus);
}
