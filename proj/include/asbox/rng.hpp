#pragma once

#include <cstdint>
#include <string_view>

namespace asbox {

// SplitMix64 in counter mode: output i of stream `key` is
// mix(key + (i + 1) * 0x9e3779b97f4a7c15). Every draw is a pure function of
// (key, index), so runs reproduce bit-for-bit on any platform.
class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t at(std::uint64_t key, std::uint64_t index) { return mix(key + (index + 1) * kGamma); }

    // Independent key for a named sub-stream.
    static constexpr std::uint64_t derive(std::uint64_t key, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (char c : label) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        return mix(key ^ mix(h));
    }
    static constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t index) { return mix(key ^ mix(index + kGamma)); }

    std::uint64_t next() { return at(key_, counter_++); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n), n > 0, rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            std::uint64_t v = next();
            if (v < limit) return v % n;
        }
    }

    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace asbox
