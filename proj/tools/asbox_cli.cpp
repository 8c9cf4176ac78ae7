#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "asbox/errors.hpp"
#include "asbox/guard.hpp"
#include "asbox/scenario.hpp"
#include "asbox/supervisor.hpp"

using namespace asbox;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitChain = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

Scenario scenario_with_seed(const std::string& path, std::optional<std::uint64_t> seed, bool wall_clock) {
    Scenario s = path.empty() ? Scenario{} : load_scenario_file(path);
    if (path.empty()) s.options.policy = scenario_policy(s);
    if (seed) s.seed = *seed;
    s.options.wall_clock = wall_clock;
    return s;
}

void write_log(const Sandbox& sb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    sb.audit().write(out);
}

std::vector<std::string> load_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    return read_log_lines(in);
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, bool wall_clock, const std::string& log) {
    ScenarioRun run(scenario_with_seed(scenario, seed, wall_clock));
    Report r = run.run();
    if (!log.empty()) write_log(run.sandbox(), log);
    std::cout << report_json(r) << "\n";
    return kExitOk;
}

int cmd_report(const std::string& path) {
    auto lines = load_lines(path);
    auto check = verify_log_lines(lines);
    if (!check.ok) {
        std::cerr << "chain broken at seq " << check.first_bad_seq << "\n";
        return kExitChain;
    }
    std::vector<AuditRecord> records;
    records.reserve(lines.size());
    for (const auto& l : lines) records.push_back(decode_record_line(l));
    std::cout << log_summary_json(summarize_log(records)) << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& path, const std::string& head, std::optional<std::uint64_t> length) {
    auto check = verify_log_lines(load_lines(path));
    if (!head.empty() || length) {
        ChainState anchor = check.state;
        if (!head.empty()) anchor.head_hash = digest_from_hex(head);
        if (length) anchor.length = *length;
        check = verify_anchored(check, anchor);
    }
    if (!check.ok) {
        std::cout << "broken at seq " << check.first_bad_seq << "\n";
        return kExitChain;
    }
    std::cout << "ok " << check.state.length << " records, head " << to_hex(check.state.head_hash) << "\n";
    return kExitOk;
}

int cmd_seal(const std::string& scenario) {
    Scenario s = scenario_with_seed(scenario, std::nullopt, false);
    Seal sl = seal(s.options.policy, s.options.budget);
    std::cout << "policy_digest " << to_hex(sl.policy_digest) << "\n";
    std::cout << "budget_digest " << to_hex(sl.budget_digest) << "\n";
    return kExitOk;
}

int cmd_baseline(const std::string& name) {
    auto p = parse_profile(name);
    if (!p) {
        std::cerr << "unknown profile '" << name << "'\n";
        return kExitValidation;
    }
    ResourceBudget b = human_baseline(*p);
    std::cout << "# " << to_string(*p) << (installable(*p) ? "" : " (not installable)") << "\n";
    std::cout << canonical_budget_text(b);
    auto v = validate_budget(b);
    if (!v.ok()) std::cout << "# violations: " << v.describe() << "\n";
    return kExitOk;
}

int cmd_serve(const std::string& scenario, std::optional<std::uint64_t> seed, bool wall_clock, const std::string& host,
              int port, const std::string& token, const std::string& log) {
    ScenarioRun run(scenario_with_seed(scenario, seed, wall_clock));
    Supervisor sup(run.sandbox(), token);
    SupervisorServer server(sup);
    int bound = server.start(host, port);
    std::cerr << "supervisor listening on " << host << ":" << bound << "\n";
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    Report r = run.run();
    std::cout << report_json(r) << "\n" << std::flush;
    if (!log.empty()) write_log(run.sandbox(), log);
    // Keep serving telemetry and audit after the run until interrupted or killed.
    while (!g_interrupted && run.sandbox().state() != RunState::Killed) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    if (!log.empty()) write_log(run.sandbox(), log);
    server.stop();
    return kExitOk;
}

int cmd_dump(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out_path) {
    ScenarioRun run(scenario_with_seed(scenario, seed, false));
    run.run();
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot write " + out_path);
    run.sandbox().store().dump(out);
    auto st = run.sandbox().store().stats();
    std::cout << "dumped " << st.chunks << " chunks, " << st.used_bits << " bits\n";
    return kExitOk;
}

int cmd_restore(const std::string& scenario, const std::string& in_path) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + in_path);
    LongTermStore store = LongTermStore::restore(in);
    ScenarioRun run(scenario_with_seed(scenario, std::nullopt, false));
    run.sandbox().restore_store(std::move(store));
    auto st = run.sandbox().store().stats();
    nlohmann::ordered_json j;
    j["chunks"] = st.chunks;
    j["used_bits"] = st.used_bits;
    j["capacity_bits"] = st.capacity_bits;
    j["recount_bits"] = run.sandbox().store().recount_bits();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capability-governed agent sandbox"};
    app.require_subcommand(1);

    std::string scenario;
    std::optional<std::uint64_t> seed;
    bool wall_clock = false;
    std::string log;

    auto* run = app.add_subcommand("run", "Run a scenario and print its report");
    run->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_flag("--wall-clock", wall_clock, "Sleep for injected latencies");
    run->add_option("--log", log, "Write the audit log (NDJSON) here");

    std::string log_path;
    auto* report = app.add_subcommand("report", "Summarize a dumped audit log");
    report->add_option("logfile", log_path)->required();

    auto* audit = app.add_subcommand("audit", "Audit log tools");
    audit->require_subcommand(1);
    auto* verify = audit->add_subcommand("verify", "Re-check a dumped audit log");
    verify->add_option("logfile", log_path)->required();
    std::string anchor_head;
    std::optional<std::uint64_t> anchor_length;
    verify->add_option("--head", anchor_head, "Expected head hash recorded out of band");
    verify->add_option("--length", anchor_length, "Expected record count");

    auto* seal_cmd = app.add_subcommand("seal", "Seal digests");
    seal_cmd->require_subcommand(1);
    auto* seal_show = seal_cmd->add_subcommand("show", "Print policy and budget digests");
    seal_show->add_option("--scenario", scenario, "Scenario file (defaults apply without one)")->check(CLI::ExistingFile);

    std::string profile;
    auto* baseline = app.add_subcommand("baseline", "Human baseline profiles");
    baseline->require_subcommand(1);
    auto* baseline_show = baseline->add_subcommand("show", "Print a profile's budget");
    baseline_show->add_option("profile", profile)->required();

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string token;
    auto* serve = app.add_subcommand("serve", "Run a scenario under the supervisor HTTP API");
    serve->add_option("--scenario", scenario, "Scenario file")->check(CLI::ExistingFile);
    serve->add_option("--seed", seed, "Override the scenario seed");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks one)");
    serve->add_option("--supervisor-token", token, "Token required on every request")->required();
    serve->add_flag("--wall-clock", wall_clock, "Sleep for injected latencies");
    serve->add_option("--log", log, "Write the audit log (NDJSON) here");

    std::string file;
    auto* dump = app.add_subcommand("dump", "Run a scenario and dump its long-term store");
    dump->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    dump->add_option("--seed", seed, "Override the scenario seed");
    dump->add_option("--out", file, "Snapshot file")->required();

    auto* restore = app.add_subcommand("restore", "Load a long-term store snapshot into a fresh sandbox");
    restore->add_option("snapshot", file)->required();
    restore->add_option("--scenario", scenario, "Scenario whose budget applies")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*run) return cmd_run(scenario, seed, wall_clock, log);
        if (*report) return cmd_report(log_path);
        if (*verify) return cmd_verify(log_path, anchor_head, anchor_length);
        if (*seal_show) return cmd_seal(scenario);
        if (*baseline_show) return cmd_baseline(profile);
        if (*serve) return cmd_serve(scenario, seed, wall_clock, host, port, token, log);
        if (*dump) return cmd_dump(scenario, seed, file);
        if (*restore) return cmd_restore(scenario, file);
    } catch (const InvalidScenario& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return kExitValidation;
    } catch (const InvalidBudget& e) {
        std::cerr << "invalid budget: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SnapshotCorrupt& e) {
        std::cerr << "corrupt snapshot: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitOk;
}
