#pragma once

// Decision and perception latency models, the virtual clock, and operation
// charging against the ops bucket.

#include <cstdint>
#include <span>

#include "asbox/baselines.hpp"
#include "asbox/config.hpp"
#include "asbox/token_bucket.hpp"

namespace asbox {

// Shannon entropy in bits, with 0 log 0 = 0. Terms are summed in sorted order
// so the result is exactly invariant under permutation. Throws NonNormalized
// when a probability is negative or non-finite, or the sum is off by more
// than 1e-9.
double entropy(std::span<const double> distribution);

struct LatencyModel {
    Micros latency_base{200'000};
    Micros latency_per_bit{150'000};
    // Delay for a stimulus at or above complexity_ref ("complex image").
    Micros perceptual_floor{100'000};
    // Delay for an empty stimulus.
    Micros perceptual_min{10'000};
    // 75 x 50 pixels at 8 bits.
    std::int64_t complexity_ref = 30'000;
};

LatencyModel latency_model_for(const ResourceBudget& budget);
LatencyModel apply_latency_overrides(LatencyModel base, const Config& cfg, std::string_view section = "latency");

// Hick's law: latency_base + latency_per_bit * H(distribution), rounded to the
// nearest microsecond.
Micros decision_latency(const LatencyModel& model, std::span<const double> distribution);

// Piecewise-linear, saturating at perceptual_floor once complexity reaches
// complexity_ref.
Micros perceptual_delay(const LatencyModel& model, std::int64_t complexity_bits);

class VirtualClock {
public:
    explicit VirtualClock(std::int64_t tick_rate = 1000);

    std::int64_t now() const;   // ticks
    Micros elapsed() const { return elapsed_; }
    std::int64_t tick_rate() const { return tick_rate_; }

    // Throws RangeError on a negative duration.
    void advance(Micros d);

private:
    Micros elapsed_{0};
    std::int64_t tick_rate_;
};

// Throttles n operations through the ops bucket and advances the clock by the
// wait. Throws UnsatisfiableRequest when n exceeds the bucket burst.
Micros charge_ops(VirtualClock& clock, TokenBucket& ops_bucket, std::int64_t n);

}  // namespace asbox
