#include "asbox/memory.hpp"

#include <algorithm>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>

#include "asbox/errors.hpp"

namespace asbox {

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

MemoryTiming apply_memory_overrides(MemoryTiming base, const Config& cfg, std::string_view section) {
    if (auto v = cfg.get(section, "write_penalty")) base.write_penalty = parse_duration(*v);
    if (auto v = cfg.get(section, "recall_penalty")) base.recall_penalty = parse_duration(*v);
    if (base.write_penalty.count() <= 0) throw ConfigError("write_penalty must be positive");
    if (base.recall_penalty.count() < 0) throw ConfigError("recall_penalty must be non-negative");
    return base;
}

// ---------------------------------------------------------------------------
// LongTermStore

LongTermStore::LongTermStore(std::int64_t capacity_bits) : capacity_bits_(capacity_bits) {
    if (capacity_bits <= 0) throw RangeError("store capacity must be positive");
}

LongTermStore::LongTermStore(LongTermStore&& other) noexcept
    : capacity_bits_(other.capacity_bits_), used_bits_(other.used_bits_), chunks_(std::move(other.chunks_)) {}

void LongTermStore::insert(const std::string& key, Bytes payload) {
    if (payload.empty()) throw RangeError("chunk payload must be non-empty");
    auto bits = static_cast<std::int64_t>(payload.size()) * 8;
    std::unique_lock lock(mutex_);
    if (chunks_.count(key) != 0) throw DuplicateKey("key already stored: " + key);
    if (used_bits_ + bits > capacity_bits_) {
        throw QuotaExceeded("write of " + std::to_string(bits) + " bits exceeds capacity (" +
                            std::to_string(used_bits_) + "/" + std::to_string(capacity_bits_) + " used)");
    }
    chunks_.emplace(key, std::move(payload));
    used_bits_ += bits;
}

std::int64_t LongTermStore::erase(const std::string& key) {
    std::unique_lock lock(mutex_);
    auto it = chunks_.find(key);
    if (it == chunks_.end()) throw MissingKey("no such key: " + key);
    auto bits = static_cast<std::int64_t>(it->second.size()) * 8;
    chunks_.erase(it);
    used_bits_ -= bits;
    return bits;
}

bool LongTermStore::contains(const std::string& key) const {
    std::shared_lock lock(mutex_);
    return chunks_.count(key) != 0;
}

std::optional<Bytes> LongTermStore::find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = chunks_.find(key);
    if (it == chunks_.end()) return std::nullopt;
    return it->second;
}

std::int64_t LongTermStore::size_bits(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = chunks_.find(key);
    if (it == chunks_.end()) throw MissingKey("no such key: " + key);
    return static_cast<std::int64_t>(it->second.size()) * 8;
}

void LongTermStore::set_capacity(std::int64_t capacity_bits) {
    std::unique_lock lock(mutex_);
    if (capacity_bits <= 0) throw RangeError("store capacity must be positive");
    if (capacity_bits < used_bits_) {
        throw QuotaExceeded("capacity " + std::to_string(capacity_bits) + " is below current usage " +
                            std::to_string(used_bits_));
    }
    capacity_bits_ = capacity_bits;
}

std::int64_t LongTermStore::used_bits() const {
    std::shared_lock lock(mutex_);
    return used_bits_;
}

std::int64_t LongTermStore::capacity_bits() const {
    std::shared_lock lock(mutex_);
    return capacity_bits_;
}

StoreStats LongTermStore::stats() const {
    std::shared_lock lock(mutex_);
    return {used_bits_, capacity_bits_, chunks_.size()};
}

std::int64_t LongTermStore::recount_bits() const {
    std::shared_lock lock(mutex_);
    return std::accumulate(chunks_.begin(), chunks_.end(), std::int64_t{0},
                           [](std::int64_t acc, const auto& kv) { return acc + static_cast<std::int64_t>(kv.second.size()) * 8; });
}

std::vector<std::string> LongTermStore::keys() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(chunks_.size());
    for (const auto& kv : chunks_) out.push_back(kv.first);
    return out;
}

// Snapshot layout, all integers big-endian:
//   "ASBOXLTM" u32 version=1 u64 capacity_bits
//   per chunk: 'R' u32 key_len key u32 payload_len payload
//   trailer:   'T' u64 used_bits u64 chunk_count
namespace {

constexpr char kMagic[8] = {'A', 'S', 'B', 'O', 'X', 'L', 'T', 'M'};

void put_be(std::ostream& out, std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_be(std::istream& in, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
        int c = in.get();
        if (c == std::char_traits<char>::eof()) throw SnapshotCorrupt("truncated memory snapshot");
        v = (v << 8) | static_cast<std::uint8_t>(c);
    }
    return v;
}

void get_exact(std::istream& in, char* dst, std::size_t n) {
    if (!in.read(dst, static_cast<std::streamsize>(n))) throw SnapshotCorrupt("truncated memory snapshot");
}

}  // namespace

void LongTermStore::dump(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    out.write(kMagic, sizeof kMagic);
    put_be(out, 1, 4);
    put_be(out, static_cast<std::uint64_t>(capacity_bits_), 8);
    for (const auto& [key, payload] : chunks_) {
        out.put('R');
        put_be(out, key.size(), 4);
        out.write(key.data(), static_cast<std::streamsize>(key.size()));
        put_be(out, payload.size(), 4);
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    }
    out.put('T');
    put_be(out, static_cast<std::uint64_t>(used_bits_), 8);
    put_be(out, chunks_.size(), 8);
}

LongTermStore LongTermStore::restore(std::istream& in) {
    char magic[sizeof kMagic];
    get_exact(in, magic, sizeof magic);
    if (!std::equal(magic, magic + sizeof magic, kMagic)) throw SnapshotCorrupt("bad memory snapshot magic");
    if (get_be(in, 4) != 1) throw SnapshotCorrupt("unsupported memory snapshot version");
    auto capacity = static_cast<std::int64_t>(get_be(in, 8));
    if (capacity <= 0) throw SnapshotCorrupt("invalid capacity in memory snapshot");
    LongTermStore store(capacity);
    for (;;) {
        int tag = in.get();
        if (tag == 'R') {
            std::string key(get_be(in, 4), '\0');
            get_exact(in, key.data(), key.size());
            Bytes payload(get_be(in, 4));
            get_exact(in, reinterpret_cast<char*>(payload.data()), payload.size());
            try {
                store.insert(key, std::move(payload));
            } catch (const Error& e) {
                throw SnapshotCorrupt(std::string("invalid chunk in memory snapshot: ") + e.what());
            }
        } else if (tag == 'T') {
            auto used = static_cast<std::int64_t>(get_be(in, 8));
            auto count = get_be(in, 8);
            if (used != store.used_bits_ || count != store.chunks_.size()) {
                throw SnapshotCorrupt("memory snapshot trailer disagrees with stored chunks");
            }
            if (in.peek() != std::char_traits<char>::eof()) throw SnapshotCorrupt("trailing bytes after snapshot trailer");
            return store;
        } else {
            throw SnapshotCorrupt("unexpected record tag in memory snapshot");
        }
    }
}

// ---------------------------------------------------------------------------
// WorkingMemory

WorkingMemory::WorkingMemory(std::size_t capacity) : slots_(capacity), stamps_(capacity, 0) {
    if (capacity == 0) throw RangeError("working memory needs at least one slot");
}

LoadResult WorkingMemory::load(const std::string& key) {
    LoadResult r;
    std::optional<std::size_t> free_slot;
    std::size_t lru = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i] && *slots_[i] == key) {
            stamps_[i] = ++clock_;
            r.slot = i;
            r.already_present = true;
            return r;
        }
        if (!slots_[i] && !free_slot) free_slot = i;
        if (stamps_[i] < stamps_[lru]) lru = i;
    }
    std::size_t target = free_slot.value_or(lru);
    if (!free_slot) r.evicted = slots_[target];
    slots_[target] = key;
    stamps_[target] = ++clock_;
    r.slot = target;
    return r;
}

bool WorkingMemory::contains(const std::string& key) const {
    return std::any_of(slots_.begin(), slots_.end(), [&](const auto& s) { return s && *s == key; });
}

bool WorkingMemory::touch(const std::string& key) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i] && *slots_[i] == key) {
            stamps_[i] = ++clock_;
            return true;
        }
    }
    return false;
}

bool WorkingMemory::remove(const std::string& key) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i] && *slots_[i] == key) {
            slots_[i].reset();
            stamps_[i] = 0;
            return true;
        }
    }
    return false;
}

std::vector<std::string> WorkingMemory::resize(std::size_t capacity) {
    if (capacity == 0) throw RangeError("working memory needs at least one slot");
    auto keep = by_recency();
    std::vector<std::string> evicted;
    while (keep.size() > capacity) {
        evicted.push_back(keep.back());
        keep.pop_back();
    }
    slots_.assign(capacity, std::nullopt);
    stamps_.assign(capacity, 0);
    clock_ = 0;
    for (auto it = keep.rbegin(); it != keep.rend(); ++it) load(*it);
    return evicted;
}

std::size_t WorkingMemory::occupancy() const {
    return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); }));
}

std::vector<std::string> WorkingMemory::by_recency() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i]) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return stamps_[a] > stamps_[b]; });
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(*slots_[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Governed access

Micros transfer_time(std::int64_t bytes, std::int64_t bandwidth) {
    if (bandwidth <= 0) throw RangeError("bandwidth must be positive");
    __int128 num = static_cast<__int128>(bytes) * 1'000'000;
    return Micros{static_cast<std::int64_t>((num + bandwidth - 1) / bandwidth)};
}

Micros throttle_split(TokenBucket& bucket, std::int64_t amount, Micros now) {
    Micros waited{0};
    while (amount > 0) {
        std::int64_t grant = std::min(amount, bucket.burst());
        waited += bucket.throttle(grant, now + waited);
        amount -= grant;
    }
    return waited;
}

WriteReceipt ltm_write(LongTermStore& store, const std::string& key, Bytes payload, TokenBucket& write_bucket,
                       const MemoryTiming& timing, Micros now) {
    if (payload.empty()) throw RangeError("chunk payload must be non-empty");
    auto size_bytes = static_cast<std::int64_t>(payload.size());
    {
        auto stats = store.stats();
        if (store.contains(key)) throw DuplicateKey("key already stored: " + key);
        if (stats.used_bits + size_bytes * 8 > stats.capacity_bits) {
            throw QuotaExceeded("write of " + std::to_string(size_bytes * 8) + " bits exceeds capacity (" +
                                std::to_string(stats.used_bits) + "/" + std::to_string(stats.capacity_bits) + " used)");
        }
    }
    WriteReceipt r;
    r.wait = throttle_split(write_bucket, size_bytes, now);
    r.latency = transfer_time(size_bytes, write_bucket.rate()) + timing.write_penalty;
    r.size_bits = size_bytes * 8;
    store.insert(key, std::move(payload));
    return r;
}

ReadResult ltm_read(const LongTermStore& store, WorkingMemory& wm, const std::string& key, TokenBucket& read_bucket,
                    const MemoryTiming& timing, Micros now) {
    auto payload = store.find(key);
    if (!payload) throw MissingKey("no such key: " + key);
    ReadResult r;
    auto size_bytes = static_cast<std::int64_t>(payload->size());
    r.latency = transfer_time(size_bytes, read_bucket.rate());
    if (!wm.touch(key)) {
        r.recalled = true;
        r.latency += timing.recall_penalty;
        r.evicted = wm.load(key).evicted;
    }
    r.wait = throttle_split(read_bucket, size_bytes, now);
    r.payload = std::move(*payload);
    return r;
}

LoadResult wm_load(WorkingMemory& wm, const LongTermStore& store, const std::string& key) {
    if (!store.contains(key)) throw MissingKey("no such key: " + key);
    return wm.load(key);
}

}  // namespace asbox
