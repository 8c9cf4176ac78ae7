#pragma once

// Self-modification defenses: the agent policy and the budget are sealed with
// integrity digests; only the supervisor channel may change them.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asbox/audit.hpp"
#include "asbox/baselines.hpp"
#include "asbox/digest.hpp"
#include "asbox/memory.hpp"

namespace asbox {

struct Seal {
    Digest policy_digest{};
    Digest budget_digest{};
    std::int64_t sealed_at = 0;

    friend bool operator==(const Seal&, const Seal&) = default;
};

// Throws InvalidBudget when the budget fails validation.
Seal seal(std::span<const std::uint8_t> policy, const ResourceBudget& budget, std::int64_t tick = 0);

struct SealCheck {
    std::vector<std::string> drifted;  // "policy" and/or "budget"

    bool ok() const { return drifted.empty(); }
};

SealCheck verify(std::span<const std::uint8_t> policy, const ResourceBudget& budget, const Seal& s);

enum class Origin { Agent, Supervisor };
std::string_view to_string(Origin o);

// Additive deltas per budget field (canonical units; durations in microseconds),
// and optionally a replacement policy blob.
struct ChangeRequest {
    std::map<std::string, std::int64_t> budget_delta;
    std::optional<Bytes> policy;
};

struct ChangeOutcome {
    bool accepted = false;
    std::string reason;
};

class Guard {
public:
    // Extra admission check run after validate_budget on supervisor changes;
    // returns a refusal reason or nullopt.
    using Admission = std::function<std::optional<std::string>(const ResourceBudget&)>;

    // Seals the artifacts and appends the seal record. Throws InvalidBudget.
    Guard(Bytes policy, ResourceBudget budget, AuditLog& log, std::int64_t tick = 0);

    const Seal& current_seal() const { return seal_; }
    const ResourceBudget& budget() const { return budget_; }
    const Bytes& policy() const { return policy_; }

    // Checks externally supplied artifacts against the current seal; audited.
    SealCheck verify(std::span<const std::uint8_t> policy, const ResourceBudget& budget, std::int64_t tick,
                     const std::string& task_id = "");
    SealCheck verify_current(std::int64_t tick);

    // Agent-originated requests are always refused and raise an alarm record.
    ChangeOutcome request_change(Origin origin, const ChangeRequest& change, std::int64_t tick,
                                 const std::string& task_id = "");

    void set_admission(Admission a) { admission_ = std::move(a); }

private:
    Bytes policy_;
    ResourceBudget budget_;
    Seal seal_;
    AuditLog& log_;
    Admission admission_;
};

}  // namespace asbox
