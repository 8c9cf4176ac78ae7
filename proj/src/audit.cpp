#include "asbox/audit.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>

#include "asbox/errors.hpp"

namespace asbox {

namespace {

constexpr std::array<std::pair<RecordKind, std::string_view>, 8> kKindNames{{
    {RecordKind::Perceive, "perceive"},
    {RecordKind::Decide, "decide"},
    {RecordKind::Memory, "memory"},
    {RecordKind::Guard, "guard"},
    {RecordKind::Budget, "budget"},
    {RecordKind::Anomaly, "anomaly"},
    {RecordKind::TaskSummary, "task-summary"},
    {RecordKind::Control, "control"},
}};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

}  // namespace

std::string_view to_string(RecordKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) return name;
    }
    return "unknown";
}

std::optional<RecordKind> parse_record_kind(std::string_view s) {
    for (const auto& [kind, name] : kKindNames) {
        if (name == s) return kind;
    }
    return std::nullopt;
}

bool operator==(const AuditRecord& a, const AuditRecord& b) {
    return a.seq == b.seq && a.prev_hash == b.prev_hash && a.hash == b.hash && canonical_bytes(a) == canonical_bytes(b);
}

std::string canonical_bytes(const AuditRecord& r) {
    const auto& f = r.fields;
    std::string out;
    put_u64(out, r.seq);
    put_u64(out, static_cast<std::uint64_t>(f.tick));
    put_str(out, f.task_id);
    put_str(out, to_string(f.kind));
    put_u64(out, static_cast<std::uint64_t>(f.ops_used));
    put_u64(out, static_cast<std::uint64_t>(f.bytes_read));
    put_u64(out, static_cast<std::uint64_t>(f.bytes_written));
    put_u64(out, static_cast<std::uint64_t>(f.latency_injected.count()));
    put_u32(out, static_cast<std::uint32_t>(f.biases_applied.size()));
    for (const auto& b : f.biases_applied) {
        put_str(out, b.id);
        put_u64(out, std::bit_cast<std::uint64_t>(b.max_abs_delta));
    }
    put_str(out, f.detail);
    return out;
}

Digest compute_hash(const AuditRecord& r) {
    std::string buf(r.prev_hash.begin(), r.prev_hash.end());
    buf += canonical_bytes(r);
    return sha256(buf);
}

std::string encode_record_line(const AuditRecord& r) {
    const auto& f = r.fields;
    nlohmann::ordered_json j;
    j["seq"] = r.seq;
    j["tick"] = f.tick;
    j["task_id"] = f.task_id;
    j["kind"] = to_string(f.kind);
    j["ops_used"] = f.ops_used;
    j["bytes_read"] = f.bytes_read;
    j["bytes_written"] = f.bytes_written;
    j["latency_injected_us"] = f.latency_injected.count();
    auto biases = nlohmann::ordered_json::array();
    for (const auto& b : f.biases_applied) biases.push_back(nlohmann::ordered_json::array({b.id, b.max_abs_delta}));
    j["biases_applied"] = std::move(biases);
    j["detail"] = f.detail;
    j["prev_hash"] = to_hex(r.prev_hash);
    j["hash"] = to_hex(r.hash);
    return j.dump();
}

AuditRecord decode_record_line(std::string_view line) {
    static const std::vector<std::string> kKeys{"seq",           "tick",        "task_id", "kind",
                                                "ops_used",      "bytes_read",  "bytes_written",
                                                "latency_injected_us", "biases_applied", "detail",
                                                "prev_hash",     "hash"};
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw RangeError(std::string("malformed audit line: ") + e.what());
    }
    if (!j.is_object() || j.size() != kKeys.size()) throw RangeError("audit line has wrong field set");
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        if (it.key() != kKeys[i]) throw RangeError("audit line field out of order: " + it.key());
    }
    auto integer = [&](const char* key) -> const nlohmann::ordered_json& {
        const auto& v = j.at(key);
        if (!v.is_number_integer()) throw RangeError(std::string("audit field not an integer: ") + key);
        return v;
    };
    auto text = [&](const char* key) -> std::string {
        const auto& v = j.at(key);
        if (!v.is_string()) throw RangeError(std::string("audit field not a string: ") + key);
        return v.get<std::string>();
    };

    AuditRecord r;
    if (!integer("seq").is_number_unsigned()) throw RangeError("audit seq must be unsigned");
    r.seq = j["seq"].get<std::uint64_t>();
    r.fields.tick = integer("tick").get<std::int64_t>();
    r.fields.task_id = text("task_id");
    auto kind = parse_record_kind(text("kind"));
    if (!kind) throw RangeError("unknown audit record kind");
    r.fields.kind = *kind;
    r.fields.ops_used = integer("ops_used").get<std::int64_t>();
    r.fields.bytes_read = integer("bytes_read").get<std::int64_t>();
    r.fields.bytes_written = integer("bytes_written").get<std::int64_t>();
    r.fields.latency_injected = Micros{integer("latency_injected_us").get<std::int64_t>()};
    const auto& biases = j.at("biases_applied");
    if (!biases.is_array()) throw RangeError("biases_applied must be an array");
    for (const auto& b : biases) {
        if (!b.is_array() || b.size() != 2 || !b[0].is_string() || !b[1].is_number()) {
            throw RangeError("malformed biases_applied entry");
        }
        r.fields.biases_applied.push_back({b[0].get<std::string>(), b[1].get<double>()});
    }
    r.fields.detail = text("detail");
    r.prev_hash = digest_from_hex(text("prev_hash"));
    r.hash = digest_from_hex(text("hash"));
    // Only the exact canonical encoding is accepted, so no two distinct lines
    // decode to the same record.
    if (encode_record_line(r) != line) throw RangeError("audit line is not in canonical form");
    return r;
}

namespace {

ChainVerification check(std::span<const AuditRecord> records, bool from_genesis) {
    ChainVerification v;
    Digest prev = kZeroDigest;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        bool linked = true;
        if (from_genesis) {
            linked = r.seq == i && r.prev_hash == prev;
        } else if (i > 0) {
            linked = r.seq == records[i - 1].seq + 1 && r.prev_hash == prev;
        }
        if (!linked || compute_hash(r) != r.hash) {
            v.ok = false;
            v.first_bad_seq = from_genesis ? i : records.front().seq + i;
            return v;
        }
        prev = r.hash;
    }
    v.state.head_hash = prev;
    v.state.length = records.size();
    return v;
}

}  // namespace

ChainVerification verify_chain(std::span<const AuditRecord> records) { return check(records, true); }

ChainVerification verify_segment(std::span<const AuditRecord> records) { return check(records, false); }

ChainVerification verify_anchored(ChainVerification v, const ChainState& anchor) {
    if (!v.ok || v.state == anchor) return v;
    v.ok = false;
    if (v.state.length != anchor.length) {
        v.first_bad_seq = std::min(v.state.length, anchor.length);
    } else {
        // Same length, different head: only the last record can be pinned down.
        v.first_bad_seq = anchor.length == 0 ? 0 : anchor.length - 1;
    }
    return v;
}

ChainVerification verify_log_lines(std::span<const std::string> lines) {
    std::vector<AuditRecord> records;
    records.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            records.push_back(decode_record_line(lines[i]));
        } catch (const Error&) {
            // Anything before this line may still be bad.
            auto prefix = verify_chain(records);
            if (!prefix.ok) return prefix;
            ChainVerification v;
            v.ok = false;
            v.first_bad_seq = i;
            return v;
        }
    }
    return verify_chain(records);
}

std::vector<std::string> read_log_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<AuditRecord> read_log(std::istream& in) {
    std::vector<AuditRecord> out;
    for (const auto& line : read_log_lines(in)) out.push_back(decode_record_line(line));
    return out;
}

// ---------------------------------------------------------------------------
// Detail strings

namespace {

std::string escape_value(std::string_view v) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : v) {
        if (c == ' ' || c == '=' || c == '%' || c < 0x20 || c == 0x7f) {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::string unescape_value(std::string_view v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        int value = 0;
        if (v[i] == '%' && i + 2 < v.size() &&
            std::from_chars(v.data() + i + 1, v.data() + i + 3, value, 16).ptr == v.data() + i + 3) {
            out.push_back(static_cast<char>(value));
            i += 2;
        } else {
            out.push_back(v[i]);
        }
    }
    return out;
}

}  // namespace

Detail& Detail::add(std::string_view key, std::string_view value) {
    if (!text_.empty()) text_ += ' ';
    text_ += key;
    text_ += '=';
    text_ += escape_value(value);
    return *this;
}

Detail& Detail::add(std::string_view key, std::int64_t value) { return add(key, std::to_string(value)); }

std::optional<std::string> detail_value(std::string_view detail, std::string_view key) {
    std::size_t pos = 0;
    while (pos < detail.size()) {
        std::size_t end = detail.find(' ', pos);
        if (end == std::string_view::npos) end = detail.size();
        std::size_t eq = pos;
        while (eq < end && detail[eq] != '=') ++eq;
        if (eq < end && detail.substr(pos, eq - pos) == key) return unescape_value(detail.substr(eq + 1, end - eq - 1));
        pos = end + 1;
    }
    return std::nullopt;
}

bool is_refusal(const AuditRecord& r) {
    if (r.fields.kind == RecordKind::Anomaly || r.fields.kind == RecordKind::TaskSummary) return false;
    auto o = detail_value(r.fields.detail, "outcome");
    return o && (*o == outcome::kRefused || *o == outcome::kQuotaExceeded);
}

bool is_self_inspection(const AuditRecord& r) {
    if (r.fields.kind == RecordKind::Anomaly || r.fields.kind == RecordKind::TaskSummary) return false;
    auto o = detail_value(r.fields.detail, "outcome");
    return o && *o == outcome::kSelfInspection;
}

bool is_task_event(const AuditRecord& r) {
    return r.fields.kind != RecordKind::TaskSummary && r.fields.kind != RecordKind::Anomaly;
}

TaskTotals fold_task(std::span<const AuditRecord> records, std::string_view task_id) {
    TaskTotals t;
    for (const auto& r : records) {
        if (r.fields.task_id != task_id || !is_task_event(r)) continue;
        t.ops_used += r.fields.ops_used;
        t.bytes_read += r.fields.bytes_read;
        t.bytes_written += r.fields.bytes_written;
        t.latency += r.fields.latency_injected;
        ++t.events;
    }
    return t;
}

// ---------------------------------------------------------------------------
// AuditLog

ChainState AuditLog::append(RecordFields fields) {
    std::unique_lock lock(mutex_);
    AuditRecord r;
    r.seq = records_.size();
    r.fields = std::move(fields);
    r.prev_hash = records_.empty() ? kZeroDigest : records_.back().hash;
    r.hash = compute_hash(r);
    records_.push_back(std::move(r));
    return {records_.back().hash, records_.size()};
}

void AuditLog::begin_task(const std::string& task_id) {
    std::unique_lock lock(mutex_);
    open_tasks_.insert(task_id);
}

void AuditLog::end_task(const std::string& task_id) {
    std::unique_lock lock(mutex_);
    open_tasks_.erase(task_id);
}

bool AuditLog::task_open(const std::string& task_id) const {
    std::shared_lock lock(mutex_);
    return open_tasks_.count(task_id) != 0;
}

AuditRecord AuditLog::account_task(const std::string& task_id, std::int64_t tick) {
    TaskTotals totals;
    std::int64_t refusals = 0;
    std::int64_t inspections = 0;
    {
        std::shared_lock lock(mutex_);
        if (open_tasks_.count(task_id) != 0) throw OpenTask("task '" + task_id + "' is still open");
        totals = fold_task(records_, task_id);
        for (const auto& r : records_) {
            if (r.fields.task_id != task_id) continue;
            if (is_refusal(r)) ++refusals;
            if (is_self_inspection(r)) ++inspections;
        }
    }
    RecordFields f;
    f.tick = tick;
    f.task_id = task_id;
    f.kind = RecordKind::TaskSummary;
    f.ops_used = totals.ops_used;
    f.bytes_read = totals.bytes_read;
    f.bytes_written = totals.bytes_written;
    f.latency_injected = totals.latency;
    f.detail = Detail().add("events", totals.events).add("refusals", refusals).add("self_inspections", inspections);
    append(std::move(f));
    std::shared_lock lock(mutex_);
    return records_.back();
}

std::vector<AuditRecord> AuditLog::records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::vector<AuditRecord> AuditLog::records_from(std::uint64_t seq) const {
    std::shared_lock lock(mutex_);
    if (seq >= records_.size()) return {};
    return {records_.begin() + static_cast<std::ptrdiff_t>(seq), records_.end()};
}

std::optional<AuditRecord> AuditLog::last() const {
    std::shared_lock lock(mutex_);
    if (records_.empty()) return std::nullopt;
    return records_.back();
}

ChainState AuditLog::state() const {
    std::shared_lock lock(mutex_);
    return {records_.empty() ? kZeroDigest : records_.back().hash, records_.size()};
}

std::uint64_t AuditLog::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

void AuditLog::write(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_) out << encode_record_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// Anomaly detection

std::string_view to_string(FlagKind k) {
    switch (k) {
        case FlagKind::Sandbagging: return "SANDBAGGING";
        case FlagKind::QuotaProbe: return "QUOTA_PROBE";
        case FlagKind::SelfInspection: return "SELF_INSPECTION";
        case FlagKind::Tamper: return "TAMPER";
    }
    return "UNKNOWN";
}

AnomalyThresholds load_anomaly_thresholds(const Config& cfg, std::string_view section) {
    AnomalyThresholds t;
    if (auto v = cfg.get(section, "window_tasks")) t.window_tasks = static_cast<std::size_t>(parse_integer(*v));
    if (auto v = cfg.get(section, "sandbagging_ratio")) t.sandbagging_ratio = parse_number(*v);
    if (auto v = cfg.get(section, "probe_count")) t.probe_count = static_cast<std::size_t>(parse_integer(*v));
    if (t.window_tasks == 0 || t.probe_count == 0) throw ConfigError("anomaly window and probe count must be positive");
    if (!(t.sandbagging_ratio > 0.0 && t.sandbagging_ratio < 1.0)) throw ConfigError("sandbagging_ratio must lie in (0,1)");
    return t;
}

std::vector<AnomalyFlag> detect_anomalies(std::span<const AuditRecord> window, const AnomalyThresholds& t) {
    if (window.empty()) throw RangeError("anomaly window is empty");
    std::vector<AnomalyFlag> flags;

    std::vector<const AuditRecord*> summaries;
    std::vector<std::uint64_t> refusals;
    std::vector<std::uint64_t> inspections;
    for (const auto& r : window) {
        if (r.fields.kind == RecordKind::TaskSummary) summaries.push_back(&r);
        if (is_refusal(r)) refusals.push_back(r.seq);
        if (is_self_inspection(r)) inspections.push_back(r.seq);
    }

    const std::size_t n = t.window_tasks;
    if (summaries.size() >= 2 * n) {
        double recent = 0.0;
        double earlier = 0.0;
        std::size_t end = summaries.size();
        for (std::size_t i = end - n; i < end; ++i) recent += static_cast<double>(summaries[i]->fields.ops_used);
        for (std::size_t i = end - 2 * n; i < end - n; ++i) earlier += static_cast<double>(summaries[i]->fields.ops_used);
        recent /= static_cast<double>(n);
        earlier /= static_cast<double>(n);
        if (earlier > 0.0 && recent <= t.sandbagging_ratio * earlier) {
            flags.push_back({FlagKind::Sandbagging,
                             Detail()
                                 .add("recent_mean_ops", static_cast<std::int64_t>(std::llround(recent)))
                                 .add("earlier_mean_ops", static_cast<std::int64_t>(std::llround(earlier)))
                                 .add("last_task", summaries.back()->fields.task_id),
                             std::nullopt});
        }
    }
    if (refusals.size() >= t.probe_count) {
        flags.push_back({FlagKind::QuotaProbe,
                         Detail()
                             .add("refusals", static_cast<std::int64_t>(refusals.size()))
                             .add("last_seq", static_cast<std::int64_t>(refusals.back())),
                         std::nullopt});
    }
    if (!inspections.empty()) {
        flags.push_back({FlagKind::SelfInspection,
                         Detail()
                             .add("reads", static_cast<std::int64_t>(inspections.size()))
                             .add("last_seq", static_cast<std::int64_t>(inspections.back())),
                         std::nullopt});
    }
    auto v = window.front().seq == 0 ? verify_chain(window) : verify_segment(window);
    if (!v.ok) {
        flags.push_back({FlagKind::Tamper, Detail().add("first_bad_seq", static_cast<std::int64_t>(v.first_bad_seq)),
                         v.first_bad_seq});
    }
    return flags;
}

void record_flags(AuditLog& log, std::span<const AnomalyFlag> flags, std::int64_t tick, const std::string& task_id) {
    for (const auto& f : flags) {
        RecordFields r;
        r.tick = tick;
        r.task_id = task_id;
        r.kind = RecordKind::Anomaly;
        r.detail = Detail().add("flag", to_string(f.kind)).str() + " " + f.detail;
        log.append(std::move(r));
    }
}

}  // namespace asbox
