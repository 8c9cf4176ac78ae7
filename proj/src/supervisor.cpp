#include "asbox/supervisor.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>

namespace asbox {

namespace {

constexpr std::chrono::milliseconds kStreamPoll{200};

bool same_token(std::string_view a, std::string_view b) {
    // Length leaks; contents are compared without an early exit.
    if (a.size() != b.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

std::string request_token(const httplib::Request& req) {
    if (req.has_header("X-Supervisor-Token")) return req.get_header_value("X-Supervisor-Token");
    if (req.has_param("token")) return req.get_param_value("token");
    return {};
}

std::int64_t query_int(const httplib::Request& req, const char* name, std::int64_t fallback) {
    if (!req.has_param(name)) return fallback;
    auto v = req.get_param_value(name);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(std::string("bad integer for '") + name + "'");
    return out;
}

void send_json(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    send_json(res, status, j.dump());
}

}  // namespace

std::string_view to_string(Command c) {
    switch (c) {
        case Command::Pause: return "pause";
        case Command::Resume: return "resume";
        case Command::Kill: return "kill";
    }
    return "unknown";
}

Supervisor::Supervisor(Sandbox& sandbox, std::string token) : sandbox_(sandbox), token_(std::move(token)) {
    if (token_.empty()) throw ConfigError("supervisor token must not be empty");
}

void Supervisor::authorize(std::string_view token, std::string_view what) {
    if (same_token(token, token_)) return;
    sandbox_.note(RecordKind::Anomaly, Detail().add("event", "bad_token").add("command", what));
    throw BadToken("bad supervisor token");
}

TelemetrySnapshot Supervisor::command(Command cmd, std::string_view token) {
    authorize(token, to_string(cmd));
    switch (cmd) {
        case Command::Pause: sandbox_.pause(); break;
        case Command::Resume: sandbox_.resume(); break;
        case Command::Kill: sandbox_.kill(); break;
    }
    return sandbox_.snapshot();
}

ChangeOutcome Supervisor::change_budget(const std::map<std::string, std::int64_t>& deltas, std::string_view token) {
    authorize(token, "budget");
    ChangeRequest req;
    req.budget_delta = deltas;
    return sandbox_.change_budget(req);
}

std::vector<TelemetrySnapshot> Supervisor::stream_telemetry(std::int64_t since_tick, std::string_view token) {
    authorize(token, "telemetry");
    return sandbox_.telemetry_since(since_tick);
}

std::vector<AuditRecord> Supervisor::audit_from(std::uint64_t seq, std::string_view token) {
    authorize(token, "audit");
    return sandbox_.audit().records_from(seq);
}

ChainVerification Supervisor::verify(std::string_view token) {
    authorize(token, "verify");
    return verify_chain(sandbox_.audit().records());
}

std::string verification_json(const ChainVerification& v) {
    nlohmann::ordered_json j;
    j["ok"] = v.ok;
    j["length"] = v.state.length;
    j["head_hash"] = to_hex(v.state.head_hash);
    if (!v.ok) j["first_bad_seq"] = v.first_bad_seq;
    return j.dump();
}

std::string change_outcome_json(const ChangeOutcome& c) {
    nlohmann::ordered_json j;
    j["accepted"] = c.accepted;
    j["reason"] = c.reason;
    return j.dump();
}

std::map<std::string, std::int64_t> parse_budget_deltas(std::string_view body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("budget body must be a JSON object");
    std::map<std::string, std::int64_t> out;
    for (auto& [key, value] : j.items()) {
        if (!value.is_number_integer()) throw ConfigError("delta for '" + key + "' must be an integer");
        out[key] = value.get<std::int64_t>();
    }
    return out;
}

SupervisorServer::SupervisorServer(Supervisor& supervisor)
    : supervisor_(supervisor), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

SupervisorServer::~SupervisorServer() { stop(); }

void SupervisorServer::install_routes() {
    auto& srv = *server_;
    Supervisor& sup = supervisor_;

    // Maps errors raised inside a handler onto status codes.
    auto guarded = [](auto handler) {
        return [handler](const httplib::Request& req, httplib::Response& res) {
            try {
                handler(req, res);
            } catch (const BadToken& e) {
                send_error(res, 401, "BadToken", e.what());
            } catch (const IllegalTransition& e) {
                send_error(res, 409, "IllegalTransition", e.what());
            } catch (const ConfigError& e) {
                send_error(res, 400, "BadRequest", e.what());
            } catch (const Error& e) {
                send_error(res, 400, "Error", e.what());
            }
        };
    };

    srv.Get("/telemetry", guarded([this, &sup](const httplib::Request& req, httplib::Response& res) {
        sup.authorize(request_token(req), "telemetry");
        std::int64_t since = query_int(req, "since", 0);
        bool follow = query_int(req, "follow", 0) != 0;
        if (!follow) {
            std::string body;
            for (const auto& s : sup.sandbox().telemetry_since(since)) body += snapshot_json(s) + "\n";
            res.set_content(body, "application/x-ndjson");
            return;
        }
        auto cursor = std::make_shared<std::size_t>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, &sup, since, cursor](std::size_t, httplib::DataSink& sink) {
                Sandbox& sb = sup.sandbox();
                auto version = sb.version();
                auto batch = sb.history_from(*cursor);
                *cursor += batch.size();
                for (const auto& s : batch) {
                    if (s.tick < since) continue;
                    std::string event = "data: " + snapshot_json(s) + "\n\n";
                    if (!sink.write(event.data(), event.size())) return false;
                }
                if (stopping_) {
                    sink.done();
                    return true;
                }
                if (batch.empty() && sb.state() == RunState::Killed && *cursor > 0) {
                    sink.done();
                    return true;
                }
                sb.wait_for_change(version, kStreamPoll);
                return true;
            });
    }));

    srv.Get("/audit", guarded([&sup](const httplib::Request& req, httplib::Response& res) {
        auto from = query_int(req, "from", 0);
        if (from < 0) throw ConfigError("from must be non-negative");
        std::string body;
        for (const auto& r : sup.audit_from(static_cast<std::uint64_t>(from), request_token(req))) {
            body += encode_record_line(r) + "\n";
        }
        res.set_content(body, "application/x-ndjson");
    }));

    srv.Get("/verify", guarded([&sup](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, verification_json(sup.verify(request_token(req))));
    }));

    auto command_route = [&](const char* path, Command cmd) {
        srv.Post(path, guarded([&sup, cmd](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, snapshot_json(sup.command(cmd, request_token(req))));
        }));
    };
    command_route("/pause", Command::Pause);
    command_route("/resume", Command::Resume);
    command_route("/kill", Command::Kill);

    srv.Post("/budget", guarded([&sup](const httplib::Request& req, httplib::Response& res) {
        sup.authorize(request_token(req), "budget");
        auto deltas = parse_budget_deltas(req.body);
        auto outcome = sup.change_budget(deltas, request_token(req));
        send_json(res, outcome.accepted ? 200 : 409, change_outcome_json(outcome));
    }));
}

int SupervisorServer::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error("cannot bind supervisor server to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void SupervisorServer::serve(const std::string& host, int port) {
    if (!server_->listen(host, port)) throw Error("cannot serve on " + host + ":" + std::to_string(port));
}

void SupervisorServer::stop() {
    stopping_ = true;
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace asbox
