#include "asbox/guard.hpp"

#include "asbox/errors.hpp"

namespace asbox {

Seal seal(std::span<const std::uint8_t> policy, const ResourceBudget& budget, std::int64_t tick) {
    auto v = validate_budget(budget);
    if (!v.ok()) throw InvalidBudget("cannot seal invalid budget: " + v.describe());
    return {sha256(policy), sha256(canonical_budget_text(budget)), tick};
}

SealCheck verify(std::span<const std::uint8_t> policy, const ResourceBudget& budget, const Seal& s) {
    SealCheck c;
    if (sha256(policy) != s.policy_digest) c.drifted.emplace_back("policy");
    if (sha256(canonical_budget_text(budget)) != s.budget_digest) c.drifted.emplace_back("budget");
    return c;
}

std::string_view to_string(Origin o) { return o == Origin::Agent ? "agent" : "supervisor"; }

Guard::Guard(Bytes policy, ResourceBudget budget, AuditLog& log, std::int64_t tick)
    : policy_(std::move(policy)), budget_(budget), seal_(asbox::seal(policy_, budget_, tick)), log_(log) {
    RecordFields f;
    f.tick = tick;
    f.kind = RecordKind::Guard;
    f.detail = Detail()
                   .add("event", "seal")
                   .add("policy_digest", to_hex(seal_.policy_digest))
                   .add("budget_digest", to_hex(seal_.budget_digest));
    log_.append(std::move(f));
}

SealCheck Guard::verify(std::span<const std::uint8_t> policy, const ResourceBudget& budget, std::int64_t tick,
                        const std::string& task_id) {
    auto check = asbox::verify(policy, budget, seal_);
    std::string drifted;
    for (const auto& d : check.drifted) drifted += (drifted.empty() ? "" : ",") + d;
    RecordFields f;
    f.tick = tick;
    f.task_id = task_id;
    f.kind = RecordKind::Guard;
    f.detail = Detail().add("event", "verify").add("result", check.ok() ? "ok" : "mismatch").add("drifted", drifted);
    log_.append(std::move(f));
    return check;
}

SealCheck Guard::verify_current(std::int64_t tick) { return verify(policy_, budget_, tick); }

ChangeOutcome Guard::request_change(Origin origin, const ChangeRequest& change, std::int64_t tick,
                                    const std::string& task_id) {
    auto audit = [&](const ChangeOutcome& out, bool alarm) {
        std::string fields;
        for (const auto& [k, v] : change.budget_delta) fields += (fields.empty() ? "" : ",") + k + ":" + std::to_string(v);
        Detail d;
        d.add("event", "change_request").add("origin", to_string(origin));
        d.add("outcome", out.accepted ? "accepted" : origin == Origin::Agent ? std::string(outcome::kRefused) : "rejected");
        if (!fields.empty()) d.add("delta", fields);
        if (change.policy) d.add("policy_change", 1);
        if (alarm) d.add("alarm", 1);
        if (!out.reason.empty()) d.add("reason", out.reason);
        if (out.accepted) d.add("budget_digest", to_hex(seal_.budget_digest)).add("policy_digest", to_hex(seal_.policy_digest));
        RecordFields f;
        f.tick = tick;
        f.task_id = task_id;
        f.kind = RecordKind::Guard;
        f.detail = d;
        log_.append(std::move(f));
    };

    if (origin == Origin::Agent) {
        ChangeOutcome out{false, "agent-originated changes are never accepted"};
        audit(out, true);
        return out;
    }

    ResourceBudget next = budget_;
    try {
        for (const auto& [field, delta] : change.budget_delta) {
            std::int64_t v = budget_field(next, field);
            std::int64_t sum = 0;
            if (__builtin_add_overflow(v, delta, &sum)) throw RangeError(field + " delta overflows");
            set_budget_field(next, field, sum);
        }
    } catch (const Error& e) {
        ChangeOutcome out{false, e.what()};
        audit(out, false);
        return out;
    }
    if (auto v = validate_budget(next); !v.ok()) {
        ChangeOutcome out{false, v.describe()};
        audit(out, false);
        return out;
    }
    if (admission_) {
        if (auto reason = admission_(next)) {
            ChangeOutcome out{false, *reason};
            audit(out, false);
            return out;
        }
    }
    budget_ = next;
    if (change.policy) policy_ = *change.policy;
    seal_ = asbox::seal(policy_, budget_, tick);
    ChangeOutcome out{true, ""};
    audit(out, false);
    return out;
}

}  // namespace asbox
