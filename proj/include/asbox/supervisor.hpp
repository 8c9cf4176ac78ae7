#pragma once

// Supervisor control plane. Every command carries the launch token; a wrong
// token raises BadToken and leaves an anomaly record. Nothing here is reachable
// through an AgentPort.

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "asbox/errors.hpp"
#include "asbox/sandbox.hpp"

namespace httplib {
class Server;
}

namespace asbox {

class BadToken : public Error {
public:
    using Error::Error;
};

enum class Command { Pause, Resume, Kill };
std::string_view to_string(Command c);

class Supervisor {
public:
    Supervisor(Sandbox& sandbox, std::string token);

    // Throws BadToken or IllegalTransition. Returns the snapshot after the
    // command took effect.
    TelemetrySnapshot command(Command cmd, std::string_view token);
    // Additive field deltas, routed through the guard as a supervisor change.
    ChangeOutcome change_budget(const std::map<std::string, std::int64_t>& deltas, std::string_view token);

    std::vector<TelemetrySnapshot> stream_telemetry(std::int64_t since_tick, std::string_view token);
    std::vector<AuditRecord> audit_from(std::uint64_t seq, std::string_view token);
    ChainVerification verify(std::string_view token);

    void authorize(std::string_view token, std::string_view what);
    Sandbox& sandbox() { return sandbox_; }

private:
    Sandbox& sandbox_;
    std::string token_;
};

// JSON renderings used on the wire.
std::string verification_json(const ChainVerification& v);
std::string change_outcome_json(const ChangeOutcome& c);
// Parses {"field": delta, ...}; throws ConfigError on anything else.
std::map<std::string, std::int64_t> parse_budget_deltas(std::string_view body);

// HTTP front end. Token in the X-Supervisor-Token header or a `token` query
// parameter.
//
//   GET  /telemetry?since=<tick>[&follow=1]  NDJSON snapshots, or an SSE stream with follow
//   GET  /audit?from=<seq>                   NDJSON audit records
//   GET  /verify                             chain verification
//   POST /pause | /resume | /kill            snapshot after the command
//   POST /budget                             body {"field": delta, ...}
class SupervisorServer {
public:
    explicit SupervisorServer(Supervisor& supervisor);
    ~SupervisorServer();
    SupervisorServer(const SupervisorServer&) = delete;
    SupervisorServer& operator=(const SupervisorServer&) = delete;

    // Binds (port 0 picks a free port) and serves on a background thread.
    // Returns the bound port; throws Error when binding fails.
    int start(const std::string& host, int port);
    // Blocks serving on the calling thread.
    void serve(const std::string& host, int port);
    void stop();

private:
    void install_routes();

    Supervisor& supervisor_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
};

}  // namespace asbox
