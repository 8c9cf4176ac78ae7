#pragma once

// Independent reference models used by the unit and acceptance tests. None of
// these share code with the library beyond plain data types.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cstdint>
#include <list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using HighPrecision = boost::multiprecision::cpp_bin_float_50;

// -sum p log2 p at 50 decimal digits.
inline double entropy(std::span<const double> p) {
    HighPrecision h = 0;
    const HighPrecision ln2 = boost::multiprecision::log(HighPrecision(2));
    for (double v : p) {
        if (v == 0.0) continue;
        HighPrecision x(v);
        h -= x * boost::multiprecision::log(x) / ln2;
    }
    return static_cast<double>(h);
}

// LRU cache over keys, most recent at the front.
class Lru {
public:
    explicit Lru(std::size_t capacity) : capacity_(capacity) {}

    std::optional<std::string> load(const std::string& key) {
        auto it = std::find(order_.begin(), order_.end(), key);
        if (it != order_.end()) {
            order_.erase(it);
            order_.push_front(key);
            return std::nullopt;
        }
        std::optional<std::string> evicted;
        if (order_.size() == capacity_) {
            evicted = order_.back();
            order_.pop_back();
        }
        order_.push_front(key);
        return evicted;
    }

    std::vector<std::string> keys() const { return {order_.begin(), order_.end()}; }
    std::size_t size() const { return order_.size(); }

private:
    std::size_t capacity_;
    std::list<std::string> order_;
};

// Token bucket advanced one tick at a time. Levels are scaled by tick_rate so
// refill per tick is the integer `rate`.
class TickBucket {
public:
    TickBucket(std::int64_t rate, std::int64_t burst, std::int64_t tick_rate)
        : rate_(rate), burst_(burst), tick_rate_(tick_rate), scaled_(burst * tick_rate) {}

    void tick() { scaled_ = std::min(scaled_ + rate_, burst_ * tick_rate_); }
    bool take(std::int64_t amount) {
        if (scaled_ < amount * tick_rate_) return false;
        scaled_ -= amount * tick_rate_;
        return true;
    }

private:
    std::int64_t rate_;
    std::int64_t burst_;
    std::int64_t tick_rate_;
    std::int64_t scaled_;
};

// True iff for every window [t_i, t_j] the amount granted inside it is at most
// burst + rate * (t_j - t_i) / units_per_second. `grants` are (time, amount)
// sorted by time.
inline bool window_bound_holds(const std::vector<std::pair<std::int64_t, std::int64_t>>& grants, std::int64_t rate,
                               std::int64_t burst, std::int64_t units_per_second) {
    // For i <= j: U*(S_j - S_{i-1}) - R*t_j <= U*B - R*t_i
    //   <=> U*S_j - R*t_j <= U*B + min_i (U*S_{i-1} - R*t_i)
    using Wide = __int128;
    Wide prefix = 0;
    std::optional<Wide> best;
    for (const auto& [t, amount] : grants) {
        Wide candidate = Wide{units_per_second} * prefix - Wide{rate} * t;
        best = best ? std::min(*best, candidate) : candidate;
        prefix += amount;
        Wide lhs = Wide{units_per_second} * prefix - Wide{rate} * t;
        if (lhs > Wide{units_per_second} * burst + *best) return false;
    }
    return true;
}

// Brute-force version of the same check, quadratic; used to validate the
// linear one on small traces.
inline bool window_bound_brute(const std::vector<std::pair<std::int64_t, std::int64_t>>& grants, std::int64_t rate,
                               std::int64_t burst, std::int64_t units_per_second) {
    for (std::size_t i = 0; i < grants.size(); ++i) {
        __int128 sum = 0;
        for (std::size_t j = i; j < grants.size(); ++j) {
            sum += grants[j].second;
            __int128 span = grants[j].first - grants[i].first;
            if (sum * units_per_second > __int128{burst} * units_per_second + __int128{rate} * span) return false;
        }
    }
    return true;
}

// Expected cost of each option at 50 digits: refraining costs p * fn (a missed
// threat), acting costs (1 - p) * fp (a false alarm). True means act is cheaper.
inline bool emt_act_cheaper(double p, double fp, double fn) {
    HighPrecision hp(p);
    return hp * HighPrecision(fn) > (HighPrecision(1) - hp) * HighPrecision(fp);
}

}  // namespace oracle
