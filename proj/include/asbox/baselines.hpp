#pragma once

// Human-cognition constants and the budget profiles derived from them.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asbox/config.hpp"

namespace asbox {

namespace human {
// Turing's practicable storage figure, in bits.
inline constexpr std::int64_t kTuringStorageBits = 10'000'000;
// Turing's epigraph estimate for the practical profile.
inline constexpr std::int64_t kTuringPracticalBits = 1'000'000'000;
// Hard storage ceiling, 10 GB (8e10 bits).
inline constexpr std::int64_t kStorageCeilingBits = 80'000'000'000;
inline constexpr std::int64_t kBrainStorageBits = 1'000'000'000'000'000;  // 1e15
inline constexpr std::int64_t kBrainOpsPerSecond = 100'000'000'000'000'000;  // 1e17
inline constexpr std::int64_t kNeurons = 100'000'000'000;  // 1e11
inline constexpr std::int64_t kSynapsesPerNeuron = 5'000;
inline constexpr int kMillerCenter = 7;
inline constexpr int kMillerMin = 5;
inline constexpr int kMillerMax = 9;
// Blum's two-tape model allows "two or three" pointers.
inline constexpr int kBlumPointers = 3;
}  // namespace human

struct ResourceBudget {
    std::int64_t storage_bits = human::kTuringStorageBits;
    std::int64_t ops_per_second = 1'000'000;
    std::int64_t ops_burst = 10'000;
    std::int64_t read_bandwidth = 1'000'000;   // bytes/s
    std::int64_t write_bandwidth = 100'000;    // bytes/s
    std::int64_t wm_slots = human::kMillerCenter;
    Micros latency_base{200'000};
    Micros latency_per_bit{150'000};
    Micros perceptual_floor{100'000};
    std::int64_t tick_rate = 1000;

    friend bool operator==(const ResourceBudget&, const ResourceBudget&) = default;
};

enum class BaselineProfile { TuringMinimal, TuringPractical, WikiCeiling, BrainReference };

inline constexpr std::array<BaselineProfile, 4> kAllProfiles{
    BaselineProfile::TuringMinimal, BaselineProfile::TuringPractical,
    BaselineProfile::WikiCeiling, BaselineProfile::BrainReference};

std::string_view to_string(BaselineProfile p);
std::optional<BaselineProfile> parse_profile(std::string_view name);

// The brain-reference profile is inspectable but never installable.
constexpr bool installable(BaselineProfile p) { return p != BaselineProfile::BrainReference; }

ResourceBudget human_baseline(BaselineProfile profile);

// neurons * synapses_per_neuron * bits_per_synapse, exact. Throws RangeError
// when the product does not fit in 64 unsigned bits.
std::uint64_t estimate_synapse_capacity(std::uint64_t neurons, std::uint64_t synapses_per_neuron,
                                        std::uint64_t bits_per_synapse = 1);

struct Violation {
    std::string field;
    std::string bound;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool violates(std::string_view field) const;
    std::string describe() const;
};

ValidationResult validate_budget(const ResourceBudget& budget);

// Field names in canonical (sorted) order.
const std::vector<std::string>& budget_field_names();

// Reads and writes a single named field; values in canonical units (bits,
// ops, bytes/s, slots, Hz; durations in microseconds). Throws ConfigError for
// an unknown field name.
std::int64_t budget_field(const ResourceBudget& b, std::string_view field);
void set_budget_field(ResourceBudget& b, std::string_view field, std::int64_t value);

// Applies `key = value` overrides from the given config section, parsing unit
// suffixes per field.
ResourceBudget apply_budget_overrides(ResourceBudget base, const Config& cfg, std::string_view section = "budget");

// Field-name-sorted, unit-normalized rendering: "name = value\n" per field,
// sizes in bits, rates in bytes/s, durations in milliseconds.
std::string canonical_budget_text(const ResourceBudget& b);

}  // namespace asbox
