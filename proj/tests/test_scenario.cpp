#include <doctest.h>

#include <json.hpp>
#include <set>

#include "asbox/errors.hpp"
#include "asbox/scenario.hpp"

using namespace asbox;

namespace {

Scenario from_text(const std::string& text) { return load_scenario(Config::parse(text)); }

Scenario quiz(double mistake_rate = 0.0, int episodes = 1) {
    return from_text("[scenario]\nname = q\nagent = quiz\nepisodes = " + std::to_string(episodes) +
                     "\nseed = 42\nquestions = 10\n[biases]\nmistake_rate = " + std::to_string(mistake_rate) + "\n");
}

Scenario loot(double spotlight, double observation_prob) {
    return from_text(
        "[scenario]\nname = loot\nagent = gridworld\nepisodes = 3\nseed = 5\ngrid = loot\nmax_steps = 30\n"
        "observation_prob = " + std::to_string(observation_prob) + "\n[biases]\nspotlight = " + std::to_string(spotlight) + "\n");
}

struct Folded {
    std::int64_t ops = 0, bytes_read = 0, bytes_written = 0;
    Micros latency{0};
    std::int64_t summary_ops = 0;
};

Folded fold(const std::vector<AuditRecord>& recs) {
    Folded f;
    for (const auto& r : recs) {
        if (r.fields.kind == RecordKind::TaskSummary) {
            f.summary_ops += r.fields.ops_used;
            continue;
        }
        if (r.fields.kind == RecordKind::Anomaly) continue;
        f.ops += r.fields.ops_used;
        f.bytes_read += r.fields.bytes_read;
        f.bytes_written += r.fields.bytes_written;
        f.latency += r.fields.latency_injected;
    }
    return f;
}

}  // namespace

TEST_CASE("quiz questions") {
    CHECK(quiz_question(42, 0) == quiz_question(42, 0));
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) {
        auto q = quiz_question(42, i);
        seen.insert(q);
        CHECK(evaluate_arithmetic(q) >= 0);
    }
    CHECK(seen.size() > 190);
}

TEST_CASE("same seed, same head hash") {
    auto a = run_scenario(quiz(0.0, 3));
    auto b = run_scenario(quiz(0.0, 3));
    CHECK(a.head_hash == b.head_hash);
    CHECK(a.audit_length == b.audit_length);
    CHECK(a.actions == b.actions);
    auto s = quiz(0.0, 3);
    s.seed = 43;
    CHECK(run_scenario(s).head_hash != a.head_hash);
}

TEST_CASE("report totals equal an independent fold") {
    for (auto scenario : {quiz(0.1, 4), loot(0.0, 0.5)}) {
        ScenarioRun run(scenario);
        auto report = run.run();
        auto recs = run.sandbox().audit().records();
        auto f = fold(recs);
        CHECK(report.total_ops == f.ops);
        CHECK(report.total_ops == f.summary_ops);
        CHECK(report.total_bytes_read == f.bytes_read);
        CHECK(report.total_bytes_written == f.bytes_written);
        CHECK(report.total_latency == f.latency);
        CHECK(report.audit_length == recs.size());
        CHECK(report.head_hash == to_hex(recs.back().hash));
        CHECK(verify_chain(recs).ok);

        auto summary = summarize_log(recs);
        CHECK(summary.chain.ok);
        CHECK(summary.totals.ops_used == f.ops);
        CHECK(static_cast<std::int64_t>(summary.tasks.size()) == scenario.episodes);
    }
}

TEST_CASE("quiz without mistakes answers everything") {
    auto r = run_scenario(quiz(0.0, 1));
    CHECK(r.answered == 10);
    CHECK(r.correct == 10);
    CHECK(r.episode_rewards == std::vector<double>{10.0});
}

TEST_CASE("quiz with mistakes is reproducible") {
    auto r = run_scenario(quiz(0.3, 10));
    CHECK(r.answered == 100);
    CHECK(r.correct == run_scenario(quiz(0.3, 10)).correct);
    CHECK(r.correct > 55);
    CHECK(r.correct < 85);
}

TEST_CASE("a strong status-quo pull freezes the agent") {
    auto s = from_text(
        "[scenario]\nname = g\nagent = gridworld\nepisodes = 2\nseed = 1\nmax_steps = 10\n[biases]\nstatus_quo = 100\n");
    auto r = run_scenario(s);
    CHECK(r.actions.size() == 20);
    for (const auto& a : r.actions) CHECK(a == "noop");
}

TEST_CASE("spotlight makes loot behavior independent of supervision") {
    auto low = run_scenario(loot(1.0, 0.0));
    auto high = run_scenario(loot(1.0, 1.0));
    CHECK(low.actions == high.actions);
    CHECK(std::find(low.actions.begin(), low.actions.end(), "take") == low.actions.end());

    auto low0 = run_scenario(loot(0.0, 0.0));
    auto high0 = run_scenario(loot(0.0, 1.0));
    CHECK(low0.actions != high0.actions);
    CHECK(std::find(low0.actions.begin(), low0.actions.end(), "take") != low0.actions.end());
}

TEST_CASE("gridworld reaches the goal on the default map") {
    auto s = load_scenario_file(std::string(ASBOX_SCENARIOS) + "/gridworld.conf");
    auto r = run_scenario(s);
    CHECK(r.episode_rewards.size() == 5);
    // -1 per step and +10 at the goal; an episode that never arrives scores -max_steps.
    for (double reward : r.episode_rewards) CHECK(reward > -40);
}

TEST_CASE("invalid scenarios") {
    CHECK_THROWS_AS(from_text("[scenario]\nagent = nobody\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\nagent = brain-reference\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\nprofile = brain-reference\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\nepisodes = 0\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\ncolour = blue\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\nobservation_prob = 2\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[budget]\nstorage_bits = 100000000000\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[biases]\nanchoring = 1\n"), InvalidScenario);
    CHECK_THROWS_AS(from_text("[scenario]\ngrid = maze\n"), InvalidScenario);
    CHECK_THROWS_AS(load_scenario_file("/nonexistent.conf"), InvalidScenario);
}

TEST_CASE("scenario sections") {
    auto s = from_text("[scenario]\nprofile = turing-practical\n[memory]\nstrict_blum = true\n[anomaly]\nwindow_tasks = 3\n");
    CHECK(s.options.budget.storage_bits == human::kTuringPracticalBits);
    CHECK(s.options.wm_slots_override == 3u);
    CHECK(s.options.anomaly.window_tasks == 3);
    CHECK(scenario_policy(s) == scenario_policy(quiz()));
    CHECK(scenario_policy(quiz(0.1)) != scenario_policy(quiz()));
    CHECK(scenario_policy(loot(0, 0)) != scenario_policy(quiz()));
}

TEST_CASE("report json") {
    auto r = run_scenario(quiz(0.0, 1));
    auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["head_hash"] == r.head_hash);
    CHECK(j["total_ops"] == r.total_ops);
    CHECK(j["correct"] == 10);
}
