#pragma once

// Scenario files and the episode runner. A scenario is a config file with a
// [scenario] section plus optional [budget], [biases], [memory], [latency] and
// [anomaly] sections:
//
//   [scenario]
//   name = quiz-baseline
//   agent = quiz            # quiz | gridworld
//   episodes = 10
//   seed = 42
//   profile = turing-minimal
//   questions = 10          # quiz: questions per episode
//   max_steps = 40          # gridworld: steps per episode
//   grid = default          # gridworld: default | loot
//   random_start = false
//   observation_prob = 1.0
//   loot_penalty = 5
//   loot_gain = 8

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asbox/agents.hpp"
#include "asbox/config.hpp"
#include "asbox/sandbox.hpp"

namespace asbox {

struct Scenario {
    std::string name = "unnamed";
    std::string agent = "quiz";
    std::int64_t episodes = 1;
    std::uint64_t seed = 0;
    BaselineProfile profile = BaselineProfile::TuringMinimal;
    std::int64_t questions = 10;
    std::int64_t max_steps = 40;
    std::string grid = "default";
    bool random_start = false;
    double observation_prob = 1.0;
    GridRewards rewards;
    SandboxOptions options;
};

// Throws InvalidScenario (wrapping any config or validation error).
Scenario load_scenario(const Config& cfg);
Scenario load_scenario_file(const std::string& path);
void validate_scenario(const Scenario& s);

// Policy blob sealed by the guard: agent id plus the canonical bias config.
Bytes scenario_policy(const Scenario& s);

struct Report {
    std::string name;
    std::string agent;
    std::uint64_t seed = 0;
    std::vector<double> episode_rewards;
    std::int64_t total_ops = 0;
    std::int64_t total_bytes_read = 0;
    std::int64_t total_bytes_written = 0;
    Micros total_latency{0};
    std::vector<AnomalyFlag> flags;
    std::string head_hash;
    std::uint64_t audit_length = 0;
    std::int64_t correct = 0;   // quiz
    std::int64_t answered = 0;  // quiz
    std::vector<std::string> actions;  // chosen ids in order
    bool killed = false;
};

std::string report_json(const Report& r);

// Owns the sandbox and agent for one run so a supervisor can attach to the
// sandbox before run() starts.
class ScenarioRun {
public:
    explicit ScenarioRun(Scenario scenario);

    Sandbox& sandbox() { return *sandbox_; }
    const Scenario& scenario() const { return scenario_; }

    // Runs every episode. A supervisor kill ends the run early with
    // report.killed set.
    Report run();

private:
    double quiz_episode(std::int64_t episode, Report& report);
    double grid_episode(std::int64_t episode, Report& report);

    Scenario scenario_;
    std::unique_ptr<Sandbox> sandbox_;
    std::unique_ptr<Agent> agent_;
};

Report run_scenario(const Scenario& scenario);

// The i-th quiz question for a seed: operands in [0, 999] joined by +, - or the
// multiplication sign; subtraction never goes negative.
std::string quiz_question(std::uint64_t seed, std::int64_t index);

// Offline summary of a dumped audit log.
struct LogSummary {
    ChainVerification chain;
    std::uint64_t records = 0;
    std::vector<std::pair<std::string, TaskTotals>> tasks;  // in summary order
    TaskTotals totals;
    std::vector<std::string> flags;  // detail of each anomaly record
    std::string head_hash;
};

LogSummary summarize_log(std::span<const AuditRecord> records);
std::string log_summary_json(const LogSummary& s);

}  // namespace asbox
