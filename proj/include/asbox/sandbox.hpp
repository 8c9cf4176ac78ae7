#pragma once

// The governed runtime. Every agent-visible operation (perceive, decide,
// memory access) is serialized through one mutex, charged against the budget
// on the virtual clock and appended to the audit log. The supervisor surface
// (pause/resume/kill, budget changes, telemetry) shares the same lock but is
// never reachable from an AgentPort.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "asbox/agents.hpp"
#include "asbox/audit.hpp"
#include "asbox/baselines.hpp"
#include "asbox/biases.hpp"
#include "asbox/errors.hpp"
#include "asbox/governor.hpp"
#include "asbox/guard.hpp"
#include "asbox/memory.hpp"
#include "asbox/perception.hpp"

namespace asbox {

enum class RunState { Running, Paused, Killed };
std::string_view to_string(RunState s);

struct SandboxOptions {
    ResourceBudget budget;
    MemoryTiming timing;
    LatencyModel latency;  // latency_base/per_bit/perceptual_floor are taken from the budget
    BiasConfig biases;
    AnomalyThresholds anomaly;
    Bytes policy;
    // Working-memory slots when different from budget.wm_slots (strict Blum preset).
    std::optional<std::size_t> wm_slots_override;
    std::int64_t max_width = kDefaultMaxWidth;
    std::int64_t max_height = kDefaultMaxHeight;
    bool wall_clock = false;
};

struct TelemetrySnapshot {
    std::int64_t tick = 0;
    std::int64_t storage_used_bits = 0;
    std::int64_t storage_cap_bits = 0;
    std::int64_t ops_granted_window = 0;  // trailing one second of virtual time
    std::int64_t ops_granted_total = 0;
    std::int64_t wm_occupancy = 0;
    std::int64_t wm_capacity = 0;
    std::string task_id;
    std::vector<std::string> recent_flags;
    std::string head_hash;
    std::uint64_t audit_length = 0;
    RunState state = RunState::Running;

    friend bool operator==(const TelemetrySnapshot&, const TelemetrySnapshot&) = default;
};

std::string snapshot_json(const TelemetrySnapshot& s);

// Thrown out of a governed operation once the run has been killed.
class RunKilled : public Error {
public:
    RunKilled() : Error("run killed by supervisor") {}
};

class IllegalTransition : public Error {
public:
    using Error::Error;
};

struct PerceiveCost {
    Micros delay{0};
    std::int64_t complexity_bits = 0;
};

struct DecideCost {
    std::int64_t ops = 0;
    Micros ops_wait{0};
    Micros latency{0};
};

// Per-operation costs as seen by the caller; the runner sums these and the
// totals must agree with a fold over the audit log.
struct CostMeter {
    std::int64_t ops = 0;
    std::int64_t bytes_read = 0;
    std::int64_t bytes_written = 0;
    Micros latency{0};
};

class Sandbox {
public:
    explicit Sandbox(SandboxOptions options);
    ~Sandbox();
    Sandbox(const Sandbox&) = delete;
    Sandbox& operator=(const Sandbox&) = delete;

    // --- agent step operations (used by the runner) --------------------------
    Observation perceive(const Stimulus& raw, PerceiveCost* cost = nullptr);
    Decision decide(const DecisionContext& ctx, std::int64_t ops, DecideCost* cost = nullptr);
    AgentPort& port();

    void begin_task(const std::string& task_id);
    // Closes the task, appends its summary and runs the anomaly detectors.
    AuditRecord end_task(const std::string& task_id);

    // Appends one record of any kind outside the governed paths (run markers).
    void note(RecordKind kind, const std::string& detail);

    // --- supervisor surface ----------------------------------------------------
    void pause();
    void resume();
    void kill();
    ChangeOutcome change_budget(const ChangeRequest& change);
    RunState state() const;
    // Blocks until the state changes from `seen` or the timeout passes.
    void wait_for_change(std::uint64_t seen_version, std::chrono::milliseconds timeout) const;
    std::uint64_t version() const;

    TelemetrySnapshot snapshot() const;
    // Snapshots recorded at every operation and state change with tick >= since.
    std::vector<TelemetrySnapshot> telemetry_since(std::int64_t since_tick) const;
    // Snapshots from position `index` of the history onward.
    std::vector<TelemetrySnapshot> history_from(std::size_t index) const;

    // --- inspection ------------------------------------------------------------
    const AuditLog& audit() const { return audit_; }
    AuditLog& audit_for_supervisor() { return audit_; }
    std::vector<AnomalyFlag> flags() const;
    Seal current_seal() const;
    ResourceBudget budget() const;
    std::int64_t now_ticks() const;
    Micros elapsed() const;
    const CostMeter& meter() const { return meter_; }
    const LongTermStore& store() const { return store_; }
    void restore_store(LongTermStore store);
    std::size_t wm_occupancy() const;
    std::vector<std::string> wm_keys() const;

private:
    class Port;
    friend class Port;

    void write_locked(const std::string& key, Bytes payload);
    Bytes read_locked(const std::string& key);
    void erase_locked(const std::string& key);
    ChangeOutcome agent_change_locked(const ChangeRequest& change);

    class SleepOff;
    std::unique_lock<std::mutex> gate();
    void charge_locked(Micros d);
    void grant_ops_locked(std::int64_t ops);
    void push_snapshot_locked();
    TelemetrySnapshot snapshot_locked() const;
    void append_locked(RecordFields f);
    void apply_budget_locked(const ResourceBudget& next);

    SandboxOptions options_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    RunState state_ = RunState::Running;
    Micros pending_sleep_{0};  // wall-clock mode, slept off after the lock is released

    // Snapshot history has its own lock so telemetry readers never wait on a step.
    mutable std::mutex telemetry_mutex_;
    mutable std::condition_variable telemetry_cv_;
    std::uint64_t version_ = 0;
    std::vector<TelemetrySnapshot> history_;

    AuditLog audit_;
    VirtualClock clock_;
    TokenBucket ops_bucket_;
    TokenBucket read_bucket_;
    TokenBucket write_bucket_;
    LatencyModel latency_;
    LongTermStore store_;
    WorkingMemory wm_;
    std::unique_ptr<Guard> guard_;
    std::unique_ptr<Port> port_;

    std::string task_id_;
    CostMeter meter_;
    std::int64_t ops_total_ = 0;
    std::deque<std::pair<Micros, std::int64_t>> ops_window_;
    std::vector<AnomalyFlag> flags_;
};

// Key prefixes naming the seal and the audit log; agent reads of these are
// flagged as self-inspection and writes are refused.
bool is_reserved_key(std::string_view key);

}  // namespace asbox
