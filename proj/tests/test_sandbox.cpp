#include <doctest.h>

#include <json.hpp>
#include <chrono>
#include <thread>

#include "asbox/errors.hpp"
#include "asbox/sandbox.hpp"

using namespace asbox;
using namespace std::chrono_literals;

namespace {

SandboxOptions options() {
    SandboxOptions o;
    o.policy = to_bytes("agent = test\n");
    return o;
}

DecisionContext two_way() {
    DecisionContext ctx;
    ActionCandidate a, b;
    a.id = "a";
    a.utility = 1;
    b.id = "b";
    b.utility = 0;
    ctx.candidates = {a, b};
    return ctx;
}

// Storage and ops reconstructed from the audit prefix alone.
std::pair<std::int64_t, std::int64_t> fold_usage(const std::vector<AuditRecord>& recs, std::size_t n) {
    std::int64_t bits = 0, ops = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = recs[i];
        if (r.fields.kind == RecordKind::Decide) ops += r.fields.ops_used;
        if (r.fields.kind != RecordKind::Memory || detail_value(r.fields.detail, "outcome") != "ok") continue;
        auto op = detail_value(r.fields.detail, "op");
        auto b = detail_value(r.fields.detail, "bits");
        if (op == "write") bits += std::stoll(*b);
        if (op == "erase") bits -= std::stoll(*b);
        if (op == "restore") bits = std::stoll(*b);
    }
    return {bits, ops};
}

}  // namespace

TEST_CASE("initial state") {
    Sandbox sb(options());
    CHECK(sb.state() == RunState::Running);
    CHECK(sb.audit().size() == 1);
    CHECK(sb.audit().records()[0].fields.kind == RecordKind::Guard);
    auto s = sb.snapshot();
    CHECK(s.tick == 0);
    CHECK(s.storage_cap_bits == ResourceBudget{}.storage_bits);
    CHECK(s.wm_capacity == ResourceBudget{}.wm_slots);
    CHECK(s.audit_length == 1);
    CHECK(s.head_hash == to_hex(sb.audit().state().head_hash));
}

TEST_CASE("perceive and decide are charged and audited") {
    Sandbox sb(options());
    PerceiveCost pc;
    auto obs = sb.perceive(make_raw_stimulus(to_bytes("2+2")), &pc);
    CHECK(obs.stimulus().payload == to_bytes("2+2"));
    CHECK(pc.complexity_bits == 24);
    CHECK(pc.delay > Micros{0});
    auto rec = *sb.audit().last();
    CHECK(rec.fields.kind == RecordKind::Perceive);
    CHECK(obs.audit_seq() == rec.seq);
    CHECK(rec.fields.latency_injected == pc.delay);

    DecideCost dc;
    auto d = sb.decide(two_way(), 500, &dc);
    CHECK(d.chosen == "a");
    CHECK(dc.ops == 500);
    rec = *sb.audit().last();
    CHECK(rec.fields.kind == RecordKind::Decide);
    CHECK(rec.fields.ops_used == 500);
    CHECK(rec.fields.latency_injected == dc.ops_wait + dc.latency);
    CHECK(sb.elapsed() == pc.delay + dc.ops_wait + dc.latency);
    CHECK(sb.meter().ops == 500);
    CHECK(sb.snapshot().ops_granted_total == 500);

    // More ops than one burst are charged in chunks and wait on the bucket.
    DecideCost big;
    sb.decide(two_way(), 25'000, &big);
    CHECK(big.ops_wait >= Micros{15'000});

    CHECK_THROWS_AS(sb.perceive(Stimulus{1, 1, 1, 12, Bytes(2), false}), InvalidStimulus);
    CHECK(detail_value(sb.audit().last()->fields.detail, "outcome") == "rejected");
}

TEST_CASE("agent port: memory and reserved keys") {
    Sandbox sb(options());
    sb.begin_task("t");
    auto& port = sb.port();
    port.write("k", to_bytes("hello"));
    CHECK(port.read("k") == to_bytes("hello"));
    CHECK(sb.wm_occupancy() == 1);
    CHECK_THROWS_AS(port.write("k", to_bytes("again")), DuplicateKey);
    CHECK_THROWS_AS(port.read("nope"), MissingKey);
    port.erase("k");
    CHECK(sb.wm_occupancy() == 0);
    CHECK(sb.store().used_bits() == 0);

    CHECK_THROWS_AS(port.read("seal/policy"), AccessDenied);
    CHECK(detail_value(sb.audit().last()->fields.detail, "outcome") == "self_inspection");
    CHECK_THROWS_AS(port.read("audit"), AccessDenied);
    CHECK_THROWS_AS(port.write("audit/0", to_bytes("x")), AccessDenied);
    CHECK(detail_value(sb.audit().last()->fields.detail, "outcome") == "refused");
    CHECK_NOTHROW(port.write("sealant", to_bytes("x")));

    ChangeRequest req;
    req.budget_delta["storage_bits"] = 1000;
    CHECK_FALSE(port.request_change(req).accepted);
    CHECK(sb.budget() == ResourceBudget{});

    sb.end_task("t");
    std::vector<std::string> kinds;
    for (const auto& f : sb.flags()) kinds.emplace_back(to_string(f.kind));
    CHECK(std::find(kinds.begin(), kinds.end(), "SELF_INSPECTION") != kinds.end());
    CHECK(sb.snapshot().recent_flags.size() >= 1);
}

TEST_CASE("quota is enforced through the port") {
    auto o = options();
    o.budget.storage_bits = 80;
    Sandbox sb(o);
    sb.port().write("a", Bytes(10));
    CHECK_THROWS_AS(sb.port().write("b", Bytes(1)), QuotaExceeded);
    CHECK(sb.store().used_bits() == 80);
    CHECK(detail_value(sb.audit().last()->fields.detail, "outcome") == "quota_exceeded");
}

TEST_CASE("telemetry agrees with a fold of the audit prefix") {
    Sandbox sb(options());
    sb.begin_task("t");
    for (int i = 0; i < 30; ++i) {
        sb.port().write("k" + std::to_string(i), Bytes(static_cast<std::size_t>(10 + i)));
        if (i % 3 == 0) sb.port().erase("k" + std::to_string(i));
        else if (i % 2 == 0) (void)sb.port().read("k" + std::to_string(i));
        sb.decide(two_way(), 100 + i);
    }
    sb.end_task("t");
    auto recs = sb.audit().records();
    auto hist = sb.history_from(0);
    CHECK(hist.size() > 60);
    for (const auto& s : hist) {
        auto [bits, ops] = fold_usage(recs, s.audit_length);
        CHECK(s.storage_used_bits == bits);
        CHECK(s.ops_granted_total == ops);
        CHECK(s.head_hash == to_hex(recs[s.audit_length - 1].hash));
        CHECK(s.wm_occupancy <= s.wm_capacity);
    }
    CHECK(sb.snapshot() == hist.back());
    CHECK(sb.telemetry_since(sb.now_ticks()).back() == hist.back());
}

TEST_CASE("snapshot json schema") {
    Sandbox sb(options());
    auto j = nlohmann::json::parse(snapshot_json(sb.snapshot()));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    std::sort(keys.begin(), keys.end());
    std::vector<std::string> expect{"audit_length", "head_hash",        "ops_granted_total", "ops_granted_window",
                                    "recent_flags", "state",            "storage_cap_bits",  "storage_used_bits",
                                    "task_id",      "tick",             "wm_capacity",       "wm_occupancy"};
    CHECK(keys == expect);
    CHECK(j["state"] == "running");
    CHECK(j["recent_flags"].is_array());
    auto line = snapshot_json(sb.snapshot());
    CHECK(line.rfind(R"({"tick":0,"storage_used_bits":0,)", 0) == 0);
}

TEST_CASE("pause, resume and kill transitions") {
    Sandbox sb(options());
    CHECK_THROWS_AS(sb.resume(), IllegalTransition);
    sb.pause();
    CHECK(sb.state() == RunState::Paused);
    CHECK_THROWS_AS(sb.pause(), IllegalTransition);
    CHECK(sb.snapshot().state == RunState::Paused);
    sb.resume();
    sb.kill();
    CHECK(sb.state() == RunState::Killed);
    CHECK_THROWS_AS(sb.resume(), IllegalTransition);
    CHECK_THROWS_AS(sb.pause(), IllegalTransition);
    CHECK_THROWS_AS(sb.kill(), IllegalTransition);
    CHECK_THROWS_AS(sb.decide(two_way(), 1), RunKilled);
    CHECK_THROWS_AS(sb.port().write("x", Bytes(1)), RunKilled);
    auto last = *sb.audit().last();
    CHECK(last.fields.kind == RecordKind::Control);
    CHECK(detail_value(last.fields.detail, "command") == "kill");
    CHECK(detail_value(last.fields.detail, "terminal") == "1");
}

TEST_CASE("no operation is granted while paused") {
    Sandbox sb(options());
    sb.pause();
    auto paused_len = sb.audit().size();
    auto paused_snapshot = sb.snapshot();
    std::atomic<int> done{0};
    std::thread agent([&] {
        for (int i = 0; i < 5; ++i) sb.decide(two_way(), 10);
        done = 1;
    });
    std::this_thread::sleep_for(100ms);
    CHECK(done == 0);
    CHECK(sb.audit().size() == paused_len);
    CHECK(sb.snapshot() == paused_snapshot);
    sb.resume();
    agent.join();
    CHECK(done == 1);
    auto recs = sb.audit().records();
    CHECK(detail_value(recs[paused_len].fields.detail, "command") == "resume");
    for (std::size_t i = paused_len + 1; i < recs.size(); ++i) CHECK(recs[i].fields.kind == RecordKind::Decide);
}

TEST_CASE("kill releases a paused agent") {
    Sandbox sb(options());
    sb.pause();
    std::atomic<bool> killed{false};
    std::thread agent([&] {
        try {
            sb.decide(two_way(), 10);
        } catch (const RunKilled&) {
            killed = true;
        }
    });
    std::this_thread::sleep_for(50ms);
    sb.kill();
    agent.join();
    CHECK(killed);
    CHECK(sb.snapshot().state == RunState::Killed);
}

TEST_CASE("budget changes pass the guard and admission") {
    Sandbox sb(options());
    ChangeRequest req;
    req.budget_delta["ops_per_second"] = -900'000;
    auto out = sb.change_budget(req);
    CHECK(out.accepted);
    CHECK(sb.budget().ops_per_second == 100'000);
    CHECK(sb.current_seal().budget_digest == seal(to_bytes("agent = test\n"), sb.budget()).budget_digest);
    auto last = *sb.audit().last();
    CHECK(last.fields.kind == RecordKind::Budget);

    req.budget_delta = {{"storage_bits", human::kStorageCeilingBits}};
    CHECK_FALSE(sb.change_budget(req).accepted);
    req.budget_delta = {{"tick_rate", 1}};
    CHECK_FALSE(sb.change_budget(req).accepted);

    sb.port().write("k", Bytes(1000));
    req.budget_delta = {{"storage_bits", -(human::kTuringStorageBits - 100)}};
    CHECK_FALSE(sb.change_budget(req).accepted);

    req.budget_delta = {{"wm_slots", 2}};
    CHECK(sb.change_budget(req).accepted);
    CHECK(sb.snapshot().wm_capacity == ResourceBudget{}.wm_slots + 2);
    CHECK(verify_chain(sb.audit().records()).ok);
}

TEST_CASE("strict working-memory override") {
    auto o = options();
    o.wm_slots_override = 3;
    Sandbox sb(o);
    for (int i = 0; i < 6; ++i) {
        sb.port().write("k" + std::to_string(i), Bytes(1));
        (void)sb.port().read("k" + std::to_string(i));
    }
    CHECK(sb.wm_occupancy() == 3);
    CHECK(sb.wm_keys() == std::vector<std::string>{"k5", "k4", "k3"});
}

TEST_CASE("wall-clock mode sleeps for injected latency") {
    auto o = options();
    o.wall_clock = true;
    Sandbox sb(o);
    auto t0 = std::chrono::steady_clock::now();
    sb.perceive(make_raw_stimulus(to_bytes("x")));
    auto took = std::chrono::steady_clock::now() - t0;
    CHECK(took >= std::chrono::duration_cast<std::chrono::steady_clock::duration>(sb.elapsed()));
}

TEST_CASE("reserved keys") {
    CHECK(is_reserved_key("seal"));
    CHECK(is_reserved_key("seal/x"));
    CHECK(is_reserved_key("audit/0"));
    CHECK_FALSE(is_reserved_key("sealant"));
    CHECK_FALSE(is_reserved_key("quiz/1"));
}
