#include "asbox/baselines.hpp"

#include <algorithm>

#include "asbox/errors.hpp"

namespace asbox {

namespace {

enum class FieldKind { Bits, Count, ByteRate, Duration, Hertz };

struct FieldSpec {
    const char* name;
    FieldKind kind;
};

// Sorted by name.
constexpr std::array<FieldSpec, 10> kFields{{
    {"latency_base", FieldKind::Duration},
    {"latency_per_bit", FieldKind::Duration},
    {"ops_burst", FieldKind::Count},
    {"ops_per_second", FieldKind::Count},
    {"perceptual_floor", FieldKind::Duration},
    {"read_bandwidth", FieldKind::ByteRate},
    {"storage_bits", FieldKind::Bits},
    {"tick_rate", FieldKind::Hertz},
    {"wm_slots", FieldKind::Count},
    {"write_bandwidth", FieldKind::ByteRate},
}};

const FieldSpec& field_spec(std::string_view name) {
    for (const auto& f : kFields) {
        if (name == f.name) return f;
    }
    throw ConfigError("unknown budget field '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(BaselineProfile p) {
    switch (p) {
        case BaselineProfile::TuringMinimal: return "turing-minimal";
        case BaselineProfile::TuringPractical: return "turing-practical";
        case BaselineProfile::WikiCeiling: return "wiki-ceiling";
        case BaselineProfile::BrainReference: return "brain-reference";
    }
    return "unknown";
}

std::optional<BaselineProfile> parse_profile(std::string_view name) {
    for (auto p : kAllProfiles) {
        if (to_string(p) == name) return p;
    }
    return std::nullopt;
}

ResourceBudget human_baseline(BaselineProfile profile) {
    ResourceBudget b;
    switch (profile) {
        case BaselineProfile::TuringMinimal:
            b.storage_bits = human::kTuringStorageBits;
            break;
        case BaselineProfile::TuringPractical:
            b.storage_bits = human::kTuringPracticalBits;
            break;
        case BaselineProfile::WikiCeiling:
            b.storage_bits = human::kStorageCeilingBits;
            break;
        case BaselineProfile::BrainReference:
            b.storage_bits = human::kBrainStorageBits;
            b.ops_per_second = human::kBrainOpsPerSecond;
            b.ops_burst = human::kBrainOpsPerSecond;
            break;
    }
    return b;
}

std::uint64_t estimate_synapse_capacity(std::uint64_t neurons, std::uint64_t synapses_per_neuron,
                                        std::uint64_t bits_per_synapse) {
    std::uint64_t partial = 0;
    std::uint64_t total = 0;
    if (__builtin_mul_overflow(neurons, synapses_per_neuron, &partial) ||
        __builtin_mul_overflow(partial, bits_per_synapse, &total)) {
        throw RangeError("synapse capacity exceeds 64-bit range");
    }
    return total;
}

bool ValidationResult::violates(std::string_view field) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.field == field; });
}

std::string ValidationResult::describe() const {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.field + " " + v.bound;
    }
    return out;
}

ValidationResult validate_budget(const ResourceBudget& b) {
    ValidationResult r;
    auto add = [&](std::string field, std::string bound) { r.violations.push_back({std::move(field), std::move(bound)}); };

    if (b.storage_bits < 1) add("storage_bits", "below minimum of 1 bit");
    if (b.storage_bits > human::kStorageCeilingBits) add("storage_bits", "exceeds 10 Gb ceiling");
    if (b.wm_slots < human::kMillerMin) add("wm_slots", "below 7±2 range");
    if (b.wm_slots > human::kMillerMax) add("wm_slots", "above 7±2 range");

    auto positive = [&](const char* field, std::int64_t v) {
        if (v <= 0) add(field, "must be strictly positive");
    };
    positive("ops_per_second", b.ops_per_second);
    positive("ops_burst", b.ops_burst);
    positive("read_bandwidth", b.read_bandwidth);
    positive("write_bandwidth", b.write_bandwidth);
    if (b.latency_base.count() < 0) add("latency_base", "must be non-negative");
    positive("latency_per_bit", b.latency_per_bit.count());
    positive("perceptual_floor", b.perceptual_floor.count());
    positive("tick_rate", b.tick_rate);
    return r;
}

const std::vector<std::string>& budget_field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& f : kFields) n.emplace_back(f.name);
        return n;
    }();
    return names;
}

std::int64_t budget_field(const ResourceBudget& b, std::string_view field) {
    field_spec(field);
    if (field == "storage_bits") return b.storage_bits;
    if (field == "ops_per_second") return b.ops_per_second;
    if (field == "ops_burst") return b.ops_burst;
    if (field == "read_bandwidth") return b.read_bandwidth;
    if (field == "write_bandwidth") return b.write_bandwidth;
    if (field == "wm_slots") return b.wm_slots;
    if (field == "latency_base") return b.latency_base.count();
    if (field == "latency_per_bit") return b.latency_per_bit.count();
    if (field == "perceptual_floor") return b.perceptual_floor.count();
    return b.tick_rate;
}

void set_budget_field(ResourceBudget& b, std::string_view field, std::int64_t value) {
    field_spec(field);
    if (field == "storage_bits") b.storage_bits = value;
    else if (field == "ops_per_second") b.ops_per_second = value;
    else if (field == "ops_burst") b.ops_burst = value;
    else if (field == "read_bandwidth") b.read_bandwidth = value;
    else if (field == "write_bandwidth") b.write_bandwidth = value;
    else if (field == "wm_slots") b.wm_slots = value;
    else if (field == "latency_base") b.latency_base = Micros{value};
    else if (field == "latency_per_bit") b.latency_per_bit = Micros{value};
    else if (field == "perceptual_floor") b.perceptual_floor = Micros{value};
    else b.tick_rate = value;
}

ResourceBudget apply_budget_overrides(ResourceBudget base, const Config& cfg, std::string_view section) {
    for (const auto& [key, value] : cfg.section(section)) {
        const auto& spec = field_spec(key);
        std::int64_t v = 0;
        switch (spec.kind) {
            case FieldKind::Bits: v = parse_bits(value); break;
            case FieldKind::ByteRate: v = parse_byte_rate(value); break;
            case FieldKind::Duration: v = parse_duration(value).count(); break;
            case FieldKind::Count:
            case FieldKind::Hertz: v = parse_integer(value); break;
        }
        set_budget_field(base, key, v);
    }
    return base;
}

std::string canonical_budget_text(const ResourceBudget& b) {
    std::string out;
    for (const auto& f : kFields) {
        std::int64_t v = budget_field(b, f.name);
        out += f.name;
        out += " = ";
        out += f.kind == FieldKind::Duration ? format_millis(Micros{v}) : std::to_string(v);
        out += '\n';
    }
    return out;
}

}  // namespace asbox
