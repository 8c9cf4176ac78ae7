#include "asbox/governor.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "asbox/errors.hpp"

namespace asbox {

double entropy(std::span<const double> distribution) {
    std::vector<double> p(distribution.begin(), distribution.end());
    for (double x : p) {
        if (!std::isfinite(x) || x < 0.0) throw NonNormalized("probabilities must be finite and non-negative");
    }
    std::sort(p.begin(), p.end());
    double sum = 0.0;
    for (double x : p) sum += x;
    if (std::fabs(sum - 1.0) > 1e-9) throw NonNormalized("probabilities sum to " + std::to_string(sum));
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log2(x);
    }
    return h;
}

LatencyModel latency_model_for(const ResourceBudget& budget) {
    LatencyModel m;
    m.latency_base = budget.latency_base;
    m.latency_per_bit = budget.latency_per_bit;
    m.perceptual_floor = budget.perceptual_floor;
    return m;
}

LatencyModel apply_latency_overrides(LatencyModel base, const Config& cfg, std::string_view section) {
    if (auto v = cfg.get(section, "perceptual_min")) base.perceptual_min = parse_duration(*v);
    if (auto v = cfg.get(section, "complexity_ref")) base.complexity_ref = parse_bits(*v);
    if (base.perceptual_min.count() < 0 || base.perceptual_min > base.perceptual_floor) {
        throw ConfigError("perceptual_min must lie in [0, perceptual_floor]");
    }
    if (base.complexity_ref <= 0) throw ConfigError("complexity_ref must be positive");
    return base;
}

Micros decision_latency(const LatencyModel& model, std::span<const double> distribution) {
    double h = entropy(distribution);
    auto extra = std::llround(static_cast<double>(model.latency_per_bit.count()) * h);
    return model.latency_base + Micros{extra};
}

Micros perceptual_delay(const LatencyModel& model, std::int64_t complexity_bits) {
    if (complexity_bits < 0) throw RangeError("stimulus complexity must be non-negative");
    std::int64_t c = std::min(complexity_bits, model.complexity_ref);
    __int128 span = (model.perceptual_floor - model.perceptual_min).count();
    __int128 scaled = (span * c * 2 + model.complexity_ref) / (2 * model.complexity_ref);
    return model.perceptual_min + Micros{static_cast<std::int64_t>(scaled)};
}

VirtualClock::VirtualClock(std::int64_t tick_rate) : tick_rate_(tick_rate) {
    if (tick_rate <= 0) throw RangeError("tick rate must be positive");
}

std::int64_t VirtualClock::now() const {
    return static_cast<std::int64_t>(static_cast<__int128>(elapsed_.count()) * tick_rate_ / 1'000'000);
}

void VirtualClock::advance(Micros d) {
    if (d.count() < 0) throw RangeError("virtual clock cannot move backwards");
    elapsed_ += d;
}

Micros charge_ops(VirtualClock& clock, TokenBucket& ops_bucket, std::int64_t n) {
    if (n < 0) throw RangeError("operation count must be non-negative");
    Micros wait = ops_bucket.throttle(n, clock.elapsed());
    clock.advance(wait);
    return wait;
}

}  // namespace asbox
