#include "asbox/sandbox.hpp"

#include <json.hpp>

#include <algorithm>
#include <thread>

#include "asbox/errors.hpp"

namespace asbox {

namespace {

constexpr Micros kOpsWindow{1'000'000};
constexpr std::size_t kRecentFlags = 8;

std::size_t wm_capacity_for(const SandboxOptions& o) {
    return o.wm_slots_override.value_or(static_cast<std::size_t>(o.budget.wm_slots));
}

LatencyModel merged_latency(const SandboxOptions& o) {
    LatencyModel m = o.latency;
    m.latency_base = o.budget.latency_base;
    m.latency_per_bit = o.budget.latency_per_bit;
    m.perceptual_floor = o.budget.perceptual_floor;
    return m;
}

}  // namespace

std::string_view to_string(RunState s) {
    switch (s) {
        case RunState::Running: return "running";
        case RunState::Paused: return "paused";
        case RunState::Killed: return "killed";
    }
    return "unknown";
}

bool is_reserved_key(std::string_view key) {
    return key.rfind("seal/", 0) == 0 || key.rfind("audit/", 0) == 0 || key == "seal" || key == "audit";
}

std::string snapshot_json(const TelemetrySnapshot& s) {
    nlohmann::ordered_json j;
    j["tick"] = s.tick;
    j["storage_used_bits"] = s.storage_used_bits;
    j["storage_cap_bits"] = s.storage_cap_bits;
    j["ops_granted_window"] = s.ops_granted_window;
    j["ops_granted_total"] = s.ops_granted_total;
    j["wm_occupancy"] = s.wm_occupancy;
    j["wm_capacity"] = s.wm_capacity;
    j["task_id"] = s.task_id;
    j["recent_flags"] = s.recent_flags;
    j["head_hash"] = s.head_hash;
    j["audit_length"] = s.audit_length;
    j["state"] = to_string(s.state);
    return j.dump();
}

// Declared before the step lock so the wall-clock sleep happens after unlock.
class Sandbox::SleepOff {
public:
    explicit SleepOff(Sandbox& sb) : sb_(sb) {}
    ~SleepOff() {
        Micros d{0};
        {
            std::lock_guard lock(sb_.mutex_);
            std::swap(d, sb_.pending_sleep_);
        }
        if (d.count() > 0) std::this_thread::sleep_for(d);
    }

private:
    Sandbox& sb_;
};

class Sandbox::Port : public AgentPort {
public:
    explicit Port(Sandbox& sb) : sb_(sb) {}

    void write(const std::string& key, Bytes payload) override {
        SleepOff sleep(sb_);
        auto lock = sb_.gate();
        sb_.write_locked(key, std::move(payload));
    }
    Bytes read(const std::string& key) override {
        SleepOff sleep(sb_);
        auto lock = sb_.gate();
        return sb_.read_locked(key);
    }
    void erase(const std::string& key) override {
        SleepOff sleep(sb_);
        auto lock = sb_.gate();
        sb_.erase_locked(key);
    }
    ChangeOutcome request_change(const ChangeRequest& change) override {
        SleepOff sleep(sb_);
        auto lock = sb_.gate();
        return sb_.agent_change_locked(change);
    }

private:
    Sandbox& sb_;
};

Sandbox::Sandbox(SandboxOptions options)
    : options_(std::move(options)),
      clock_(options_.budget.tick_rate),
      ops_bucket_(options_.budget.ops_per_second, options_.budget.ops_burst),
      read_bucket_(options_.budget.read_bandwidth, options_.budget.read_bandwidth),
      write_bucket_(options_.budget.write_bandwidth, options_.budget.write_bandwidth),
      latency_(merged_latency(options_)),
      store_(options_.budget.storage_bits),
      wm_(wm_capacity_for(options_)) {
    validate_bias_config(options_.biases);
    guard_ = std::make_unique<Guard>(options_.policy, options_.budget, audit_, 0);
    guard_->set_admission([this](const ResourceBudget& next) -> std::optional<std::string> {
        if (next.tick_rate != options_.budget.tick_rate) return "tick_rate is fixed for the lifetime of a run";
        if (next.storage_bits < store_.used_bits()) return "storage_bits below current usage";
        return std::nullopt;
    });
    port_ = std::make_unique<Port>(*this);
    push_snapshot_locked();
}

Sandbox::~Sandbox() = default;

AgentPort& Sandbox::port() { return *port_; }

std::unique_lock<std::mutex> Sandbox::gate() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return state_ != RunState::Paused; });
    if (state_ == RunState::Killed) throw RunKilled();
    return lock;
}

void Sandbox::charge_locked(Micros d) {
    clock_.advance(d);
    if (options_.wall_clock) pending_sleep_ += d;
}

void Sandbox::grant_ops_locked(std::int64_t ops) {
    if (ops <= 0) return;
    ops_total_ += ops;
    ops_window_.emplace_back(clock_.elapsed(), ops);
}

void Sandbox::append_locked(RecordFields f) {
    if (f.task_id.empty()) f.task_id = task_id_;
    f.tick = clock_.now();
    audit_.append(std::move(f));
}

TelemetrySnapshot Sandbox::snapshot_locked() const {
    TelemetrySnapshot s;
    s.tick = clock_.now();
    auto stats = store_.stats();
    s.storage_used_bits = stats.used_bits;
    s.storage_cap_bits = stats.capacity_bits;
    Micros horizon = clock_.elapsed() - kOpsWindow;
    for (const auto& [at, ops] : ops_window_) {
        if (at > horizon) s.ops_granted_window += ops;
    }
    s.ops_granted_total = ops_total_;
    s.wm_occupancy = static_cast<std::int64_t>(wm_.occupancy());
    s.wm_capacity = static_cast<std::int64_t>(wm_.capacity());
    s.task_id = task_id_;
    std::size_t start = flags_.size() > kRecentFlags ? flags_.size() - kRecentFlags : 0;
    for (std::size_t i = start; i < flags_.size(); ++i) {
        std::string f(to_string(flags_[i].kind));
        if (flags_[i].first_bad_seq) f += ":" + std::to_string(*flags_[i].first_bad_seq);
        s.recent_flags.push_back(f);
    }
    auto chain = audit_.state();
    s.head_hash = to_hex(chain.head_hash);
    s.audit_length = chain.length;
    s.state = state_;
    return s;
}

void Sandbox::push_snapshot_locked() {
    Micros horizon = clock_.elapsed() - kOpsWindow;
    while (!ops_window_.empty() && ops_window_.front().first <= horizon) ops_window_.pop_front();
    auto snap = snapshot_locked();
    {
        std::lock_guard lock(telemetry_mutex_);
        history_.push_back(std::move(snap));
        ++version_;
    }
    telemetry_cv_.notify_all();
    cv_.notify_all();
}

Observation Sandbox::perceive(const Stimulus& raw, PerceiveCost* cost) {
    SleepOff sleep(*this);
    auto lock = gate();
    Stimulus seen;
    try {
        seen = downscale(raw, options_.max_width, options_.max_height);
    } catch (const Error& e) {
        RecordFields f;
        f.kind = RecordKind::Perceive;
        f.detail = Detail().add("outcome", "rejected").add("reason", e.what());
        append_locked(std::move(f));
        push_snapshot_locked();
        throw;
    }
    std::int64_t complexity = seen.complexity_bits();
    Micros delay = perceptual_delay(latency_, complexity);
    charge_locked(delay);

    RecordFields f;
    f.kind = RecordKind::Perceive;
    f.latency_injected = delay;
    f.detail = Detail()
                   .add("in", std::to_string(raw.width) + "x" + std::to_string(raw.height))
                   .add("out", std::to_string(seen.width) + "x" + std::to_string(seen.height))
                   .add("raw", seen.raw ? 1 : 0)
                   .add("complexity_bits", complexity);
    append_locked(std::move(f));
    std::uint64_t seq = audit_.size() - 1;
    meter_.latency += delay;
    if (cost) *cost = {delay, complexity};
    push_snapshot_locked();
    return Observation(std::move(seen), seq);
}

Decision Sandbox::decide(const DecisionContext& ctx, std::int64_t ops, DecideCost* cost) {
    SleepOff sleep(*this);
    auto lock = gate();
    validate_context(ctx);
    if (ops < 0) throw RangeError("operation count must be non-negative");

    Micros ops_wait{0};
    for (std::int64_t left = ops; left > 0;) {
        std::int64_t chunk = std::min(left, ops_bucket_.burst());
        ops_wait += charge_ops(clock_, ops_bucket_, chunk);
        left -= chunk;
    }
    if (options_.wall_clock) pending_sleep_ += ops_wait;
    grant_ops_locked(ops);

    Decision d = apply_pipeline(ctx, options_.biases);
    std::vector<double> uniform(ctx.candidates.size(), 1.0 / static_cast<double>(ctx.candidates.size()));
    Micros latency = decision_latency(latency_, uniform);
    charge_locked(latency);

    RecordFields f;
    f.kind = RecordKind::Decide;
    f.ops_used = ops;
    f.latency_injected = ops_wait + latency;
    for (const auto& a : d.applied) f.biases_applied.push_back({std::string(to_string(a.id)), a.max_abs_delta});
    f.detail = Detail()
                   .add("chosen", d.chosen)
                   .add("candidates", static_cast<std::int64_t>(ctx.candidates.size()))
                   .add("ops_wait_us", ops_wait.count());
    append_locked(std::move(f));
    meter_.ops += ops;
    meter_.latency += ops_wait + latency;
    if (cost) *cost = {ops, ops_wait, latency};
    push_snapshot_locked();
    return d;
}

void Sandbox::write_locked(const std::string& key, Bytes payload) {
    RecordFields f;
    f.kind = RecordKind::Memory;
    Detail d;
    d.add("op", "write").add("key", key);
    if (is_reserved_key(key)) {
        f.detail = d.add("outcome", outcome::kRefused).add("reason", "reserved key");
        append_locked(std::move(f));
        push_snapshot_locked();
        throw AccessDenied("key '" + key + "' is reserved");
    }
    auto bits = static_cast<std::int64_t>(payload.size()) * 8;
    WriteReceipt r;
    try {
        r = ltm_write(store_, key, std::move(payload), write_bucket_, options_.timing, clock_.elapsed());
    } catch (const QuotaExceeded&) {
        f.detail = d.add("bits", bits).add("outcome", outcome::kQuotaExceeded);
        append_locked(std::move(f));
        push_snapshot_locked();
        throw;
    } catch (const DuplicateKey&) {
        f.detail = d.add("bits", bits).add("outcome", "duplicate");
        append_locked(std::move(f));
        push_snapshot_locked();
        throw;
    }
    charge_locked(r.total());
    f.bytes_written = r.size_bits / 8;
    f.latency_injected = r.total();
    f.detail = d.add("bits", r.size_bits).add("wait_us", r.wait.count()).add("outcome", "ok");
    append_locked(std::move(f));
    meter_.bytes_written += r.size_bits / 8;
    meter_.latency += r.total();
    push_snapshot_locked();
}

Bytes Sandbox::read_locked(const std::string& key) {
    RecordFields f;
    f.kind = RecordKind::Memory;
    Detail d;
    d.add("op", "read").add("key", key);
    if (is_reserved_key(key)) {
        f.detail = d.add("outcome", outcome::kSelfInspection);
        append_locked(std::move(f));
        push_snapshot_locked();
        throw AccessDenied("key '" + key + "' is not readable");
    }
    ReadResult r;
    try {
        r = ltm_read(store_, wm_, key, read_bucket_, options_.timing, clock_.elapsed());
    } catch (const MissingKey&) {
        f.detail = d.add("outcome", "missing");
        append_locked(std::move(f));
        push_snapshot_locked();
        throw;
    }
    charge_locked(r.total());
    auto bytes = static_cast<std::int64_t>(r.payload.size());
    f.bytes_read = bytes;
    f.latency_injected = r.total();
    d.add("recalled", r.recalled ? 1 : 0).add("wait_us", r.wait.count());
    if (r.evicted) d.add("evicted", *r.evicted);
    f.detail = d.add("outcome", "ok");
    append_locked(std::move(f));
    meter_.bytes_read += bytes;
    meter_.latency += r.total();
    push_snapshot_locked();
    return std::move(r.payload);
}

void Sandbox::erase_locked(const std::string& key) {
    RecordFields f;
    f.kind = RecordKind::Memory;
    Detail d;
    d.add("op", "erase").add("key", key);
    std::int64_t bits = 0;
    try {
        bits = store_.erase(key);
    } catch (const MissingKey&) {
        f.detail = d.add("outcome", "missing");
        append_locked(std::move(f));
        push_snapshot_locked();
        throw;
    }
    wm_.remove(key);
    f.detail = d.add("bits", bits).add("outcome", "ok");
    append_locked(std::move(f));
    push_snapshot_locked();
}

ChangeOutcome Sandbox::agent_change_locked(const ChangeRequest& change) {
    auto out = guard_->request_change(Origin::Agent, change, clock_.now(), task_id_);
    push_snapshot_locked();
    return out;
}

void Sandbox::begin_task(const std::string& task_id) {
    auto lock = gate();
    task_id_ = task_id;
    audit_.begin_task(task_id);
    push_snapshot_locked();
}

AuditRecord Sandbox::end_task(const std::string& task_id) {
    std::unique_lock lock(mutex_);
    audit_.end_task(task_id);
    AuditRecord summary = audit_.account_task(task_id, clock_.now());
    if (task_id_ == task_id) task_id_.clear();

    auto records = audit_.records();
    std::vector<std::size_t> summary_idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].fields.kind == RecordKind::TaskSummary) summary_idx.push_back(i);
    }
    std::size_t span_tasks = 2 * options_.anomaly.window_tasks;
    std::size_t start = summary_idx.size() > span_tasks ? summary_idx[summary_idx.size() - span_tasks - 1] + 1 : 0;
    auto window = std::span<const AuditRecord>(records).subspan(start);
    auto found = detect_anomalies(window, options_.anomaly);
    std::vector<AnomalyFlag> fresh;
    for (auto& flag : found) {
        if (std::find(flags_.begin(), flags_.end(), flag) == flags_.end()) fresh.push_back(flag);
    }
    record_flags(audit_, fresh, clock_.now(), task_id);
    flags_.insert(flags_.end(), fresh.begin(), fresh.end());
    push_snapshot_locked();
    return summary;
}

void Sandbox::note(RecordKind kind, const std::string& detail) {
    std::unique_lock lock(mutex_);
    RecordFields f;
    f.kind = kind;
    f.detail = detail;
    append_locked(std::move(f));
    push_snapshot_locked();
}

void Sandbox::pause() {
    std::unique_lock lock(mutex_);
    if (state_ != RunState::Running) throw IllegalTransition(std::string("cannot pause while ") + std::string(to_string(state_)));
    state_ = RunState::Paused;
    RecordFields f;
    f.kind = RecordKind::Control;
    f.detail = Detail().add("command", "pause");
    append_locked(std::move(f));
    push_snapshot_locked();
}

void Sandbox::resume() {
    std::unique_lock lock(mutex_);
    if (state_ != RunState::Paused) throw IllegalTransition(std::string("cannot resume while ") + std::string(to_string(state_)));
    state_ = RunState::Running;
    RecordFields f;
    f.kind = RecordKind::Control;
    f.detail = Detail().add("command", "resume");
    append_locked(std::move(f));
    push_snapshot_locked();
}

void Sandbox::kill() {
    std::unique_lock lock(mutex_);
    if (state_ == RunState::Killed) throw IllegalTransition("run already killed");
    state_ = RunState::Killed;
    RecordFields f;
    f.kind = RecordKind::Control;
    f.detail = Detail().add("command", "kill").add("terminal", 1);
    append_locked(std::move(f));
    push_snapshot_locked();
}

ChangeOutcome Sandbox::change_budget(const ChangeRequest& change) {
    std::unique_lock lock(mutex_);
    if (state_ == RunState::Killed) throw IllegalTransition("run already killed");
    auto out = guard_->request_change(Origin::Supervisor, change, clock_.now(), task_id_);
    if (out.accepted) apply_budget_locked(guard_->budget());
    push_snapshot_locked();
    return out;
}

void Sandbox::apply_budget_locked(const ResourceBudget& next) {
    Micros now = clock_.elapsed();
    ops_bucket_.reconfigure(next.ops_per_second, next.ops_burst, now);
    read_bucket_.reconfigure(next.read_bandwidth, next.read_bandwidth, now);
    write_bucket_.reconfigure(next.write_bandwidth, next.write_bandwidth, now);
    latency_.latency_base = next.latency_base;
    latency_.latency_per_bit = next.latency_per_bit;
    latency_.perceptual_floor = next.perceptual_floor;
    latency_.perceptual_min = std::min(latency_.perceptual_min, next.perceptual_floor);
    store_.set_capacity(next.storage_bits);
    if (!options_.wm_slots_override && static_cast<std::size_t>(next.wm_slots) != wm_.capacity()) {
        wm_.resize(static_cast<std::size_t>(next.wm_slots));
    }
    options_.budget = next;
    RecordFields f;
    f.kind = RecordKind::Budget;
    f.detail = Detail().add("event", "applied").add("budget_digest", to_hex(guard_->current_seal().budget_digest));
    append_locked(std::move(f));
}

RunState Sandbox::state() const {
    std::unique_lock lock(mutex_);
    return state_;
}

std::uint64_t Sandbox::version() const {
    std::lock_guard lock(telemetry_mutex_);
    return version_;
}

void Sandbox::wait_for_change(std::uint64_t seen_version, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(telemetry_mutex_);
    telemetry_cv_.wait_for(lock, timeout, [&] { return version_ != seen_version; });
}

TelemetrySnapshot Sandbox::snapshot() const {
    std::lock_guard lock(telemetry_mutex_);
    return history_.back();
}

std::vector<TelemetrySnapshot> Sandbox::telemetry_since(std::int64_t since_tick) const {
    std::lock_guard lock(telemetry_mutex_);
    std::vector<TelemetrySnapshot> out;
    for (const auto& s : history_) {
        if (s.tick >= since_tick) out.push_back(s);
    }
    return out;
}

std::vector<TelemetrySnapshot> Sandbox::history_from(std::size_t index) const {
    std::lock_guard lock(telemetry_mutex_);
    if (index >= history_.size()) return {};
    return {history_.begin() + static_cast<std::ptrdiff_t>(index), history_.end()};
}

std::vector<AnomalyFlag> Sandbox::flags() const {
    std::unique_lock lock(mutex_);
    return flags_;
}

Seal Sandbox::current_seal() const {
    std::unique_lock lock(mutex_);
    return guard_->current_seal();
}

ResourceBudget Sandbox::budget() const {
    std::unique_lock lock(mutex_);
    return guard_->budget();
}

std::int64_t Sandbox::now_ticks() const {
    std::unique_lock lock(mutex_);
    return clock_.now();
}

Micros Sandbox::elapsed() const {
    std::unique_lock lock(mutex_);
    return clock_.elapsed();
}

void Sandbox::restore_store(LongTermStore store) {
    std::unique_lock lock(mutex_);
    if (store.used_bits() > options_.budget.storage_bits) throw QuotaExceeded("restored memory exceeds storage budget");
    store_.set_capacity(std::max(store_.capacity_bits(), store.used_bits()));
    for (const auto& key : store_.keys()) store_.erase(key);
    for (const auto& key : store.keys()) store_.insert(key, *store.find(key));
    store_.set_capacity(options_.budget.storage_bits);
    RecordFields f;
    f.kind = RecordKind::Memory;
    f.detail = Detail().add("op", "restore").add("bits", store_.used_bits()).add("chunks", static_cast<std::int64_t>(store_.stats().chunks));
    append_locked(std::move(f));
    push_snapshot_locked();
}

std::size_t Sandbox::wm_occupancy() const {
    std::unique_lock lock(mutex_);
    return wm_.occupancy();
}

std::vector<std::string> Sandbox::wm_keys() const {
    std::unique_lock lock(mutex_);
    return wm_.by_recency();
}

}  // namespace asbox
