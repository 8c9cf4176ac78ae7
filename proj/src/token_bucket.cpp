#include "asbox/token_bucket.hpp"

#include <algorithm>
#include <string>

#include "asbox/errors.hpp"

namespace asbox {

namespace {
constexpr __int128 kMicro = 1'000'000;
}

TokenBucket::TokenBucket(std::int64_t rate_per_second, std::int64_t burst, Micros start)
    : rate_(rate_per_second), burst_(burst), level_(static_cast<__int128>(burst) * kMicro), last_(start) {
    if (rate_ <= 0 || burst_ <= 0) throw RangeError("token bucket rate and burst must be positive");
}

void TokenBucket::refill(Micros now) {
    if (now <= last_) return;
    __int128 cap = static_cast<__int128>(burst_) * kMicro;
    __int128 gained = static_cast<__int128>(rate_) * (now - last_).count();
    level_ = std::min(cap, level_ + gained);
    last_ = now;
}

Micros TokenBucket::throttle(std::int64_t amount, Micros now) {
    if (amount < 0) throw RangeError("throttle amount must be non-negative");
    if (amount > burst_) {
        throw UnsatisfiableRequest("request of " + std::to_string(amount) + " tokens exceeds burst of " +
                                   std::to_string(burst_));
    }
    if (amount == 0) return Micros{0};
    Micros start = std::max(now, last_);
    refill(start);
    __int128 need = static_cast<__int128>(amount) * kMicro;
    if (level_ >= need) {
        level_ -= need;
        return start - now;
    }
    __int128 deficit = need - level_;
    auto extra = static_cast<std::int64_t>((deficit + rate_ - 1) / rate_);
    refill(start + Micros{extra});
    level_ -= need;
    return start + Micros{extra} - now;
}

double TokenBucket::available(Micros now) const {
    TokenBucket copy = *this;
    copy.refill(now);
    return copy.tokens();
}

void TokenBucket::reconfigure(std::int64_t rate_per_second, std::int64_t burst, Micros now) {
    if (rate_per_second <= 0 || burst <= 0) throw RangeError("token bucket rate and burst must be positive");
    refill(now);
    rate_ = rate_per_second;
    burst_ = burst;
    level_ = std::min(level_, static_cast<__int128>(burst_) * kMicro);
}

}  // namespace asbox
