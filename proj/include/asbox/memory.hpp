#pragma once

// Two-tape memory: a capacity-quota'd long-term store with slow writes and
// fast pointer reads, fronted by a small LRU working memory of chunk keys.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "asbox/config.hpp"
#include "asbox/token_bucket.hpp"

namespace asbox {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view s);

struct MemoryTiming {
    Micros write_penalty{50'000};
    Micros recall_penalty{200'000};
};

MemoryTiming apply_memory_overrides(MemoryTiming base, const Config& cfg, std::string_view section = "memory");

struct StoreStats {
    std::int64_t used_bits = 0;
    std::int64_t capacity_bits = 0;
    std::size_t chunks = 0;
};

class LongTermStore {
public:
    explicit LongTermStore(std::int64_t capacity_bits);

    // Throws DuplicateKey, QuotaExceeded (store unchanged) or RangeError for an
    // empty payload.
    void insert(const std::string& key, Bytes payload);
    // Returns the bits freed. Throws MissingKey.
    std::int64_t erase(const std::string& key);

    bool contains(const std::string& key) const;
    std::optional<Bytes> find(const std::string& key) const;
    std::int64_t size_bits(const std::string& key) const;

    // Fails with QuotaExceeded when the new capacity is below current usage.
    void set_capacity(std::int64_t capacity_bits);

    std::int64_t used_bits() const;
    std::int64_t capacity_bits() const;
    // used/capacity/count read under one lock.
    StoreStats stats() const;
    // Sum of stored chunk sizes, recomputed from scratch.
    std::int64_t recount_bits() const;
    std::vector<std::string> keys() const;

    void dump(std::ostream& out) const;
    static LongTermStore restore(std::istream& in);

    LongTermStore(LongTermStore&& other) noexcept;
    LongTermStore& operator=(LongTermStore&&) = delete;

private:
    mutable std::shared_mutex mutex_;
    std::int64_t capacity_bits_;
    std::int64_t used_bits_ = 0;
    std::map<std::string, Bytes, std::less<>> chunks_;
};

struct LoadResult {
    std::size_t slot = 0;
    std::optional<std::string> evicted;
    bool already_present = false;
};

class WorkingMemory {
public:
    explicit WorkingMemory(std::size_t capacity);

    // Loads without consulting the store; prefer wm_load().
    LoadResult load(const std::string& key);
    bool contains(const std::string& key) const;
    // Marks a present key as most recently used; returns false if absent.
    bool touch(const std::string& key);
    bool remove(const std::string& key);
    // Changes the slot count, evicting least recently used keys as needed.
    std::vector<std::string> resize(std::size_t capacity);

    std::size_t capacity() const { return slots_.size(); }
    std::size_t occupancy() const;
    const std::vector<std::optional<std::string>>& slots() const { return slots_; }
    // Keys from most to least recently used.
    std::vector<std::string> by_recency() const;

private:
    std::vector<std::optional<std::string>> slots_;
    std::vector<std::uint64_t> stamps_;
    std::uint64_t clock_ = 0;
};

struct WriteReceipt {
    Micros latency{0};  // transfer + write penalty
    Micros wait{0};     // bandwidth throttling
    std::int64_t size_bits = 0;

    Micros total() const { return latency + wait; }
};

struct ReadResult {
    Bytes payload;
    Micros latency{0};  // transfer, plus recall penalty on a working-memory miss
    Micros wait{0};
    bool recalled = false;
    std::optional<std::string> evicted;

    Micros total() const { return latency + wait; }
};

// Time to move `bytes` at `bandwidth` bytes/s, rounded up to the microsecond.
Micros transfer_time(std::int64_t bytes, std::int64_t bandwidth);

// Throttle that splits amounts larger than the burst into consecutive grants.
Micros throttle_split(TokenBucket& bucket, std::int64_t amount, Micros now);

WriteReceipt ltm_write(LongTermStore& store, const std::string& key, Bytes payload, TokenBucket& write_bucket,
                       const MemoryTiming& timing, Micros now);

ReadResult ltm_read(const LongTermStore& store, WorkingMemory& wm, const std::string& key, TokenBucket& read_bucket,
                    const MemoryTiming& timing, Micros now);

LoadResult wm_load(WorkingMemory& wm, const LongTermStore& store, const std::string& key);

}  // namespace asbox
