#include <doctest.h>

#include <random>

#include "asbox/errors.hpp"
#include "asbox/guard.hpp"

using namespace asbox;

namespace {

const Bytes kPolicy = to_bytes("agent = quiz\n");

std::vector<AuditRecord> guard_records(const AuditLog& log) {
    std::vector<AuditRecord> out;
    for (const auto& r : log.records())
        if (r.fields.kind == RecordKind::Guard) out.push_back(r);
    return out;
}

}  // namespace

TEST_CASE("seals are deterministic and sensitive") {
    ResourceBudget b;
    auto s1 = seal(kPolicy, b);
    auto s2 = seal(kPolicy, b);
    CHECK(s1 == s2);
    CHECK(s1.policy_digest == sha256(std::string("agent = quiz\n")));

    auto flipped = kPolicy;
    flipped[0] ^= 1;
    CHECK(seal(flipped, b).policy_digest != s1.policy_digest);
    CHECK(seal(flipped, b).budget_digest == s1.budget_digest);

    ResourceBudget c = b;
    c.ops_per_second += 1;
    CHECK(seal(kPolicy, c).budget_digest != s1.budget_digest);
}

TEST_CASE("sealing an over-ceiling budget fails") {
    ResourceBudget b;
    b.storage_bits = 100'000'000'000;
    CHECK_THROWS_AS(seal(kPolicy, b), InvalidBudget);
    b.storage_bits = human::kStorageCeilingBits + 1;
    CHECK_THROWS_AS(seal(kPolicy, b), InvalidBudget);
    b.storage_bits = human::kStorageCeilingBits;
    CHECK_NOTHROW(seal(kPolicy, b));
    AuditLog log;
    b.storage_bits = human::kStorageCeilingBits + 1;
    CHECK_THROWS_AS(Guard(kPolicy, b, log), InvalidBudget);
}

TEST_CASE("verify names what drifted") {
    ResourceBudget b;
    auto s = seal(kPolicy, b);
    CHECK(verify(kPolicy, b, s).ok());

    ResourceBudget c = b;
    c.wm_slots = 9;
    CHECK(verify(kPolicy, c, s).drifted == std::vector<std::string>{"budget"});

    auto p = kPolicy;
    p.push_back('x');
    CHECK(verify(p, b, s).drifted == std::vector<std::string>{"policy"});
    CHECK(verify(p, c, s).drifted == std::vector<std::string>{"policy", "budget"});
}

TEST_CASE("guard construction appends a seal record") {
    AuditLog log;
    Guard g(kPolicy, ResourceBudget{}, log);
    REQUIRE(log.size() == 1);
    auto r = log.records()[0];
    CHECK(r.fields.kind == RecordKind::Guard);
    CHECK(detail_value(r.fields.detail, "budget_digest") == to_hex(g.current_seal().budget_digest));
    CHECK(g.verify_current(1).ok());

    ResourceBudget other;
    other.ops_burst = 1;
    CHECK_FALSE(g.verify(kPolicy, other, 2).ok());
    CHECK(verify_chain(log.records()).ok);
}

TEST_CASE("agent change requests are refused with an alarm") {
    AuditLog log;
    Guard g(kPolicy, ResourceBudget{}, log);
    auto before = g.current_seal();
    ChangeRequest req;
    req.budget_delta["ops_per_second"] = 1'000'000;
    auto out = g.request_change(Origin::Agent, req, 5, "task");
    CHECK_FALSE(out.accepted);
    CHECK(g.current_seal() == before);
    CHECK(g.budget() == ResourceBudget{});

    auto rec = guard_records(log).back();
    CHECK(detail_value(rec.fields.detail, "origin") == "agent");
    CHECK(detail_value(rec.fields.detail, "outcome") == "refused");
    CHECK(detail_value(rec.fields.detail, "alarm") == "1");
    CHECK(rec.fields.task_id == "task");
    CHECK(is_refusal(rec));

    ChangeRequest pol;
    pol.policy = to_bytes("agent = other\n");
    CHECK_FALSE(g.request_change(Origin::Agent, pol, 6).accepted);
    CHECK(g.policy() == kPolicy);
}

TEST_CASE("random agent requests are never accepted") {
    AuditLog log;
    Guard g(kPolicy, ResourceBudget{}, log);
    auto before = g.current_seal();
    std::mt19937_64 rng(1);
    const auto& fields = budget_field_names();
    for (int i = 0; i < 500; ++i) {
        ChangeRequest req;
        req.budget_delta[fields[rng() % fields.size()]] = static_cast<std::int64_t>(rng() % 2001) - 1000;
        if (rng() % 4 == 0) req.policy = to_bytes(std::to_string(rng()));
        CHECK_FALSE(g.request_change(Origin::Agent, req, i).accepted);
    }
    CHECK(g.current_seal() == before);
    CHECK(guard_records(log).size() == 501);
}

TEST_CASE("supervisor changes reseal") {
    AuditLog log;
    ResourceBudget b;
    Guard g(kPolicy, b, log);
    auto old_seal = g.current_seal();
    ChangeRequest req;
    req.budget_delta["ops_per_second"] = -500'000;
    auto out = g.request_change(Origin::Supervisor, req, 3);
    CHECK(out.accepted);
    CHECK(g.budget().ops_per_second == 500'000);
    CHECK(g.current_seal() != old_seal);
    CHECK(g.current_seal().sealed_at == 3);
    CHECK(g.verify_current(4).ok());
    CHECK_FALSE(verify(g.policy(), g.budget(), old_seal).ok());
    auto rec = guard_records(log);
    CHECK(detail_value(rec[rec.size() - 2].fields.detail, "outcome") == "accepted");
}

TEST_CASE("supervisor changes past the ceiling are refused") {
    AuditLog log;
    ResourceBudget b;
    b.storage_bits = human::kStorageCeilingBits - 5;
    Guard g(kPolicy, b, log);
    auto before = g.current_seal();

    ChangeRequest req;
    req.budget_delta["storage_bits"] = 6;
    auto out = g.request_change(Origin::Supervisor, req, 1);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason.find("storage_bits") != std::string::npos);
    CHECK(g.current_seal() == before);

    req.budget_delta["storage_bits"] = 5;
    CHECK(g.request_change(Origin::Supervisor, req, 2).accepted);
    CHECK(g.budget().storage_bits == human::kStorageCeilingBits);

    req.budget_delta["storage_bits"] = 100'000'000'000;
    CHECK_FALSE(g.request_change(Origin::Supervisor, req, 3).accepted);

    req.budget_delta = {{"no_such_field", 1}};
    CHECK_FALSE(g.request_change(Origin::Supervisor, req, 4).accepted);
    req.budget_delta = {{"ops_per_second", INT64_MAX}};
    CHECK_FALSE(g.request_change(Origin::Supervisor, req, 5).accepted);
    req.budget_delta = {{"ops_per_second", -2'000'000}};
    CHECK_FALSE(g.request_change(Origin::Supervisor, req, 6).accepted);
}

TEST_CASE("admission hook can veto supervisor changes") {
    AuditLog log;
    Guard g(kPolicy, ResourceBudget{}, log);
    g.set_admission([](const ResourceBudget& b) -> std::optional<std::string> {
        if (b.tick_rate != 1000) return "tick_rate is fixed";
        return std::nullopt;
    });
    ChangeRequest req;
    req.budget_delta["tick_rate"] = 1;
    auto out = g.request_change(Origin::Supervisor, req, 1);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == "tick_rate is fixed");
    auto rec = guard_records(log).back();
    CHECK(detail_value(rec.fields.detail, "outcome") == "rejected");
    CHECK_FALSE(is_refusal(rec));
}
