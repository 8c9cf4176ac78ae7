#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "asbox/errors.hpp"
#include "asbox/governor.hpp"
#include "oracles.hpp"

using namespace asbox;

namespace {

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& v : p) sum += v = u(rng);
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

TEST_CASE("entropy examples") {
    CHECK(entropy(uniform(4)) == 2.0);
    CHECK(entropy(std::vector<double>{0.5, 0.25, 0.25}) == 1.5);
    CHECK(entropy(std::vector<double>{1.0}) == 0.0);
    CHECK(entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
}

TEST_CASE("entropy rejects bad distributions") {
    CHECK_THROWS_AS(entropy(std::vector<double>{0.5, 0.4}), NonNormalized);
    CHECK_THROWS_AS(entropy(std::vector<double>{1.5, -0.5}), NonNormalized);
    CHECK_THROWS_AS(entropy(std::vector<double>{NAN, 1.0}), NonNormalized);
    CHECK_THROWS_AS(entropy(std::vector<double>{}), NonNormalized);
    CHECK_NOTHROW(entropy(std::vector<double>{0.5, 0.5 + 5e-10}));
}

TEST_CASE("entropy matches high precision and respects bounds") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        auto p = random_distribution(rng, 1 + rng() % 40);
        double h = entropy(p);
        CHECK(std::fabs(h - oracle::entropy(p)) < 1e-12);
        CHECK(h >= 0.0);
        CHECK(h <= std::log2(static_cast<double>(p.size())) + 1e-12);
    }
}

TEST_CASE("entropy and latency are permutation invariant") {
    std::mt19937_64 rng(23);
    LatencyModel m;
    for (int i = 0; i < 100; ++i) {
        auto p = random_distribution(rng, 2 + rng() % 20);
        double h = entropy(p);
        Micros l = decision_latency(m, p);
        for (int k = 0; k < 5; ++k) {
            std::shuffle(p.begin(), p.end(), rng);
            CHECK(entropy(p) == h);
            CHECK(decision_latency(m, p) == l);
        }
    }
}

TEST_CASE("Hick latency examples") {
    LatencyModel m;
    CHECK(decision_latency(m, uniform(4)) == Micros{500'000});
    CHECK(decision_latency(m, uniform(1)) == m.latency_base);
    CHECK(decision_latency(m, uniform(8)) - decision_latency(m, uniform(2)) == 2 * m.latency_per_bit);
}

TEST_CASE("Hick slope equals latency_per_bit") {
    for (auto per_bit : {Micros{150'000}, Micros{1}, Micros{37'123}}) {
        LatencyModel m;
        m.latency_per_bit = per_bit;
        std::vector<double> xs, ys;
        for (int n : {2, 4, 8, 16}) {
            xs.push_back(std::log2(n));
            ys.push_back(static_cast<double>(decision_latency(m, uniform(static_cast<std::size_t>(n))).count()));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
        mx /= xs.size(), my /= ys.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
        double slope = sxy / sxx;
        CHECK(std::fabs(slope - static_cast<double>(per_bit.count())) / static_cast<double>(per_bit.count()) < 1e-9);
    }
}

TEST_CASE("perceptual delay curve") {
    LatencyModel m;
    CHECK(perceptual_delay(m, 0) == Micros{10'000});
    CHECK(perceptual_delay(m, 15'000) == Micros{55'000});
    CHECK(perceptual_delay(m, 30'000) == Micros{100'000});
    CHECK(perceptual_delay(m, 30'000'000) == Micros{100'000});
    Micros prev{0};
    for (std::int64_t c = 0; c <= 40'000; c += 97) {
        auto d = perceptual_delay(m, c);
        CHECK(d >= prev);
        CHECK(d <= 2 * m.perceptual_floor);
        prev = d;
    }
    CHECK_THROWS_AS(perceptual_delay(m, -1), RangeError);
}

TEST_CASE("virtual clock") {
    VirtualClock c(1000);
    CHECK(c.now() == 0);
    c.advance(Micros{1500});
    CHECK(c.now() == 1);
    c.advance(Micros{500});
    CHECK(c.now() == 2);
    CHECK_THROWS_AS(c.advance(Micros{-1}), RangeError);
    CHECK(c.elapsed() == Micros{2000});
    CHECK_THROWS_AS(VirtualClock(0), RangeError);
}

TEST_CASE("charge_ops examples") {
    VirtualClock clock(1000);
    TokenBucket bucket(100, 100);
    CHECK(charge_ops(clock, bucket, 0) == Micros{0});
    CHECK(clock.now() == 0);
    charge_ops(clock, bucket, 100);
    CHECK(charge_ops(clock, bucket, 100) == Micros{1'000'000});
    CHECK(clock.now() == 1000);
    CHECK_THROWS_AS(charge_ops(clock, bucket, 101), UnsatisfiableRequest);
}

TEST_CASE("sustained 2x demand is held to burst plus rate times window") {
    VirtualClock clock(1000);
    const std::int64_t rate = 1000, burst = 50;
    TokenBucket bucket(rate, burst);
    std::int64_t granted = 0;
    // Ask for 2 * rate per second in 1 ms slots for 10 s of demand.
    std::vector<std::pair<std::int64_t, std::int64_t>> grants;
    Micros demand{0};
    while (demand < Micros{10'000'000}) {
        auto wait = charge_ops(clock, bucket, 2);
        (void)wait;
        granted += 2;
        grants.emplace_back(clock.elapsed().count(), 2);
        demand += Micros{1000};
    }
    std::int64_t window_us = clock.elapsed().count();
    CHECK(granted * 1'000'000 <= burst * 1'000'000 + rate * window_us);
    CHECK(oracle::window_bound_holds(grants, rate, burst, 1'000'000));
}

TEST_CASE("latency overrides from config") {
    auto cfg = Config::parse("[latency]\nperceptual_min = 5ms\ncomplexity_ref = 1000\n");
    auto m = apply_latency_overrides(LatencyModel{}, cfg);
    CHECK(m.perceptual_min == Micros{5'000});
    CHECK(m.complexity_ref == 1000);
    CHECK_THROWS_AS(apply_latency_overrides(LatencyModel{}, Config::parse("[latency]\nperceptual_min = 1s\n")), ConfigError);

    ResourceBudget b;
    b.latency_base = Micros{123};
    CHECK(latency_model_for(b).latency_base == Micros{123});
}
