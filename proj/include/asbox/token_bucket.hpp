#pragma once

#include <cstdint>

#include "asbox/config.hpp"

namespace asbox {

// Token bucket on a virtual timeline. Refill is linear in elapsed time and
// capped at `burst`. Levels are kept in micro-tokens so refill arithmetic is
// exact at microsecond resolution.
class TokenBucket {
public:
    TokenBucket(std::int64_t rate_per_second, std::int64_t burst, Micros start = Micros{0});

    // Debits `amount` tokens at or after `now`, returning how long the caller
    // has to wait before the grant. Requests are served in arrival order: if an
    // earlier grant already reserved the bucket past `now`, the wait includes
    // that backlog. Throws UnsatisfiableRequest when amount > burst.
    Micros throttle(std::int64_t amount, Micros now);

    // Tokens available at `now` without debiting.
    double available(Micros now) const;

    // Replaces rate and burst, refilling up to `now` first.
    void reconfigure(std::int64_t rate_per_second, std::int64_t burst, Micros now);

    std::int64_t rate() const { return rate_; }
    std::int64_t burst() const { return burst_; }
    double tokens() const { return static_cast<double>(level_) / 1e6; }
    Micros last_refill() const { return last_; }

private:
    void refill(Micros now);

    std::int64_t rate_;
    std::int64_t burst_;
    __int128 level_;  // micro-tokens
    Micros last_;
};

}  // namespace asbox
