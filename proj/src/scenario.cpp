#include "asbox/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <set>

#include "asbox/errors.hpp"
#include "asbox/rng.hpp"

namespace asbox {

namespace {

const std::set<std::string, std::less<>> kScenarioKeys{
    "name", "agent", "episodes", "seed", "profile", "questions", "max_steps", "grid",
    "random_start", "observation_prob", "loot_penalty", "loot_gain"};

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("expected a boolean, got '" + std::string(v) + "'");
}

GridState initial_grid(const Scenario& s) { return s.grid == "loot" ? loot_grid() : default_grid(); }

std::int64_t parse_answer(const std::string& id) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), v);
    if (ec != std::errc() || ptr != id.data() + id.size()) throw RangeError("quiz candidate '" + id + "' is not a number");
    return v;
}

}  // namespace

void validate_scenario(const Scenario& s) {
    if (s.agent != "quiz" && s.agent != "gridworld") throw InvalidScenario("unknown agent '" + s.agent + "'");
    if (s.episodes < 1) throw InvalidScenario("episodes must be at least 1");
    if (s.questions < 1) throw InvalidScenario("questions must be at least 1");
    if (s.max_steps < 1) throw InvalidScenario("max_steps must be at least 1");
    if (s.grid != "default" && s.grid != "loot") throw InvalidScenario("grid must be 'default' or 'loot'");
    if (!(s.observation_prob >= 0.0 && s.observation_prob <= 1.0)) throw InvalidScenario("observation_prob must lie in [0,1]");
    auto v = validate_budget(s.options.budget);
    if (!v.ok()) throw InvalidScenario("budget: " + v.describe());
    try {
        validate_bias_config(s.options.biases);
    } catch (const Error& e) {
        throw InvalidScenario(std::string("biases: ") + e.what());
    }
}

Scenario load_scenario(const Config& cfg) {
    Scenario s;
    try {
        if (!cfg.has_section("scenario")) throw InvalidScenario("missing [scenario] section");
        for (const auto& [key, value] : cfg.section("scenario")) {
            if (!kScenarioKeys.count(key)) throw InvalidScenario("unknown scenario key '" + key + "'");
        }
        auto get = [&](std::string_view key) { return cfg.get("scenario", key); };
        if (auto v = get("name")) s.name = *v;
        if (auto v = get("agent")) s.agent = *v;
        if (auto v = get("episodes")) s.episodes = parse_integer(*v);
        if (auto v = get("seed")) s.seed = static_cast<std::uint64_t>(parse_integer(*v));
        if (auto v = get("profile")) {
            auto p = parse_profile(*v);
            if (!p) throw InvalidScenario("unknown profile '" + *v + "'");
            if (!installable(*p)) throw InvalidScenario("profile '" + *v + "' is not installable");
            s.profile = *p;
        }
        if (auto v = get("questions")) s.questions = parse_integer(*v);
        if (auto v = get("max_steps")) s.max_steps = parse_integer(*v);
        if (auto v = get("grid")) s.grid = *v;
        if (auto v = get("random_start")) s.random_start = parse_bool(*v);
        if (auto v = get("observation_prob")) s.observation_prob = parse_number(*v);
        if (auto v = get("loot_penalty")) s.rewards.loot_penalty = parse_number(*v);
        if (auto v = get("loot_gain")) s.rewards.loot_gain = parse_number(*v);

        auto& o = s.options;
        o.budget = apply_budget_overrides(human_baseline(s.profile), cfg, "budget");
        o.timing = apply_memory_overrides(MemoryTiming{}, cfg, "memory");
        if (auto v = cfg.get("memory", "strict_blum"); v && parse_bool(*v)) {
            o.wm_slots_override = static_cast<std::size_t>(human::kBlumPointers);
        }
        o.latency = apply_latency_overrides(latency_model_for(o.budget), cfg, "latency");
        o.biases = load_bias_config(cfg, "biases");
        o.anomaly = load_anomaly_thresholds(cfg, "anomaly");
    } catch (const InvalidScenario&) {
        throw;
    } catch (const Error& e) {
        throw InvalidScenario(e.what());
    }
    validate_scenario(s);
    s.options.policy = scenario_policy(s);
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    try {
        return load_scenario(Config::load(path));
    } catch (const InvalidScenario&) {
        throw;
    } catch (const Error& e) {
        throw InvalidScenario(e.what());
    }
}

Bytes scenario_policy(const Scenario& s) {
    return to_bytes("agent = " + s.agent + "\n" + canonical_bias_text(s.options.biases));
}

std::string quiz_question(std::uint64_t seed, std::int64_t index) {
    CounterRng rng(CounterRng::derive(CounterRng::derive(seed, "quiz"), static_cast<std::uint64_t>(index)));
    std::int64_t a = rng.between(0, 999);
    std::int64_t b = rng.between(0, 999);
    switch (rng.below(3)) {
        case 0: return std::to_string(a) + "+" + std::to_string(b);
        case 1:
            if (a < b) std::swap(a, b);
            return std::to_string(a) + "-" + std::to_string(b);
        default: return std::to_string(a) + "×" + std::to_string(b);
    }
}

ScenarioRun::ScenarioRun(Scenario scenario) : scenario_(std::move(scenario)) {
    validate_scenario(scenario_);
    if (scenario_.options.policy.empty()) scenario_.options.policy = scenario_policy(scenario_);
    sandbox_ = std::make_unique<Sandbox>(scenario_.options);
    agent_ = make_agent(scenario_.agent, scenario_.rewards);
}

double ScenarioRun::quiz_episode(std::int64_t episode, Report& report) {
    Sandbox& sb = *sandbox_;
    double reward = 0.0;
    std::uint64_t mistakes = CounterRng::derive(scenario_.seed, "mistake");
    for (std::int64_t q = 0; q < scenario_.questions; ++q) {
        std::int64_t index = episode * scenario_.questions + q;
        std::string question = quiz_question(scenario_.seed, index);
        Observation obs = sb.perceive(make_raw_stimulus(to_bytes(question)));
        agent_->perceive(obs);
        Proposal p = agent_->propose(sb.port());
        p.context.observation_prob = scenario_.observation_prob;
        Decision d = sb.decide(p.context, p.ops);
        std::int64_t answer = inject_mistake(parse_answer(d.chosen), scenario_.options.biases.mistake_rate,
                                             CounterRng::derive(mistakes, static_cast<std::uint64_t>(index)));
        bool right = answer == evaluate_arithmetic(question);
        report.actions.push_back(std::to_string(answer));
        ++report.answered;
        if (right) {
            ++report.correct;
            reward += 1.0;
        }
        agent_->learn({d.chosen, right ? 1.0 : 0.0});
    }
    return reward;
}

double ScenarioRun::grid_episode(std::int64_t episode, Report& report) {
    Sandbox& sb = *sandbox_;
    CounterRng rng(CounterRng::derive(CounterRng::derive(scenario_.seed, "grid"), static_cast<std::uint64_t>(episode)));
    GridState state = initial_grid(scenario_);
    if (scenario_.random_start) {
        auto dist = goal_distances(state);
        std::vector<GridPos> starts;
        for (int y = 0; y < kGridSize; ++y) {
            for (int x = 0; x < kGridSize; ++x) {
                if (dist[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] > 0) starts.push_back({x, y});
            }
        }
        if (!starts.empty()) state.agent = starts[rng.below(starts.size())];
    }

    double reward = 0.0;
    std::optional<std::string> prior;
    for (std::int64_t step = 0; step < scenario_.max_steps; ++step) {
        Observation obs = sb.perceive(render_grid(state));
        agent_->perceive(obs);
        Proposal p = agent_->propose(sb.port());
        p.context.observation_prob = scenario_.observation_prob;
        p.context.prior_choice = prior;
        Decision d = sb.decide(p.context, p.ops);
        report.actions.push_back(d.chosen);

        double r = -1.0;
        if (d.chosen == "take") {
            bool observed = rng.uniform() < scenario_.observation_prob;
            r += observed ? -scenario_.rewards.loot_penalty : scenario_.rewards.loot_gain;
        }
        state = apply_grid_action(state, d.chosen);
        bool done = state.agent == state.goal;
        if (done) r += 10.0;
        reward += r;
        prior = d.chosen;
        agent_->learn({d.chosen, r});
        if (done) break;
    }
    return reward;
}

Report ScenarioRun::run() {
    Report report;
    report.name = scenario_.name;
    report.agent = scenario_.agent;
    report.seed = scenario_.seed;
    Sandbox& sb = *sandbox_;
    try {
        sb.note(RecordKind::Control, Detail()
                                         .add("event", "start")
                                         .add("scenario", scenario_.name)
                                         .add("agent", scenario_.agent)
                                         .add("seed", static_cast<std::int64_t>(scenario_.seed)));
        for (std::int64_t ep = 0; ep < scenario_.episodes; ++ep) {
            std::string task = scenario_.name + "/ep" + std::to_string(ep);
            sb.begin_task(task);
            double reward = 0.0;
            try {
                reward = scenario_.agent == "quiz" ? quiz_episode(ep, report) : grid_episode(ep, report);
            } catch (const RunKilled&) {
                sb.end_task(task);
                throw;
            }
            sb.end_task(task);
            report.episode_rewards.push_back(reward);
        }
    } catch (const RunKilled&) {
        report.killed = true;
    }
    const CostMeter& m = sb.meter();
    report.total_ops = m.ops;
    report.total_bytes_read = m.bytes_read;
    report.total_bytes_written = m.bytes_written;
    report.total_latency = m.latency;
    report.flags = sb.flags();
    auto chain = sb.audit().state();
    report.head_hash = to_hex(chain.head_hash);
    report.audit_length = chain.length;
    return report;
}

Report run_scenario(const Scenario& scenario) { return ScenarioRun(scenario).run(); }

std::string report_json(const Report& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["agent"] = r.agent;
    j["seed"] = r.seed;
    j["episode_rewards"] = r.episode_rewards;
    j["total_ops"] = r.total_ops;
    j["total_bytes_read"] = r.total_bytes_read;
    j["total_bytes_written"] = r.total_bytes_written;
    j["total_latency_us"] = r.total_latency.count();
    auto flags = nlohmann::ordered_json::array();
    for (const auto& f : r.flags) {
        nlohmann::ordered_json o;
        o["kind"] = to_string(f.kind);
        o["detail"] = f.detail;
        if (f.first_bad_seq) o["first_bad_seq"] = *f.first_bad_seq;
        flags.push_back(o);
    }
    j["flags"] = flags;
    if (r.agent == "quiz") {
        j["correct"] = r.correct;
        j["answered"] = r.answered;
    }
    j["head_hash"] = r.head_hash;
    j["audit_length"] = r.audit_length;
    j["killed"] = r.killed;
    return j.dump(2);
}

LogSummary summarize_log(std::span<const AuditRecord> records) {
    LogSummary s;
    s.chain = verify_chain(records);
    s.records = records.size();
    for (const auto& r : records) {
        if (r.fields.kind == RecordKind::TaskSummary) {
            TaskTotals t{r.fields.ops_used, r.fields.bytes_read, r.fields.bytes_written, r.fields.latency_injected,
                         0};
            if (auto e = detail_value(r.fields.detail, "events")) t.events = parse_integer(*e);
            s.tasks.emplace_back(r.fields.task_id, t);
            s.totals.ops_used += t.ops_used;
            s.totals.bytes_read += t.bytes_read;
            s.totals.bytes_written += t.bytes_written;
            s.totals.latency += t.latency;
            s.totals.events += t.events;
        } else if (r.fields.kind == RecordKind::Anomaly) {
            s.flags.push_back(r.fields.detail);
        }
    }
    s.head_hash = records.empty() ? to_hex(kZeroDigest) : to_hex(records.back().hash);
    return s;
}

std::string log_summary_json(const LogSummary& s) {
    nlohmann::ordered_json j;
    j["records"] = s.records;
    j["chain_ok"] = s.chain.ok;
    if (!s.chain.ok) j["first_bad_seq"] = s.chain.first_bad_seq;
    j["head_hash"] = s.head_hash;
    auto tasks = nlohmann::ordered_json::array();
    for (const auto& [id, t] : s.tasks) {
        nlohmann::ordered_json o;
        o["task_id"] = id;
        o["ops_used"] = t.ops_used;
        o["bytes_read"] = t.bytes_read;
        o["bytes_written"] = t.bytes_written;
        o["latency_us"] = t.latency.count();
        o["events"] = t.events;
        tasks.push_back(o);
    }
    j["tasks"] = tasks;
    j["total_ops"] = s.totals.ops_used;
    j["total_bytes_read"] = s.totals.bytes_read;
    j["total_bytes_written"] = s.totals.bytes_written;
    j["total_latency_us"] = s.totals.latency.count();
    j["flags"] = s.flags;
    return j.dump(2);
}

}  // namespace asbox
