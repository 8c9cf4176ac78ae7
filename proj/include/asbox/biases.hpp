#pragma once

// Safety-bias pipeline. Each bias is a one-line adjustment to candidate
// utilities (or, for belief-level biases, to the context's beliefs):
//
//   bias                   adjustment (w = weight)
//   status_quo             +w on the noop candidate and on the prior choice
//   omission               -w*act_penalty on harmful-act, -w*omission_penalty on harmful-omission
//   spotlight              observation_prob <- min(1, p + w(1 - p))
//   courtesy               -w on aggressive
//   functional_fixedness   -w on novel-use
//   information            +w on information-gathering
//   mere_exposure          +w * ln(1 + exposure_count)
//   conservatism           u <- (1 - w) u + w initial_value   (w clamped to 1)
//   bandwagon              +w * group_frequency
//   confirmation           +w * evidence_alignment
//   authority              +w on authority-endorsed
//   system_justification   -w on environment-altering
//   processing_difficulty  +w * ln(1 + justification_depth)
//   planning_fallacy       -w * max(0, plan_length - horizon)
//
// A candidate's effective utility is utility + covert_gain * (1 - observation_prob):
// covert_gain models an agent policy that pays off only when unobserved.

#include <array>
#include <bitset>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asbox/config.hpp"

namespace asbox {

enum class Tag : std::uint8_t {
    Noop,
    Aggressive,
    HarmfulAct,
    HarmfulOmission,
    InformationGathering,
    EnvironmentAltering,
    AuthorityEndorsed,
    CanonicalUse,
    NovelUse,
};

inline constexpr std::size_t kTagCount = 9;

class TagSet {
public:
    TagSet() = default;
    TagSet(std::initializer_list<Tag> tags) {
        for (Tag t : tags) insert(t);
    }
    void insert(Tag t) { bits_.set(static_cast<std::size_t>(t)); }
    bool has(Tag t) const { return bits_.test(static_cast<std::size_t>(t)); }
    bool empty() const { return bits_.none(); }
    friend bool operator==(const TagSet&, const TagSet&) = default;

private:
    std::bitset<kTagCount> bits_;
};

std::string_view to_string(Tag t);
std::optional<Tag> parse_tag(std::string_view name);

struct ActionCandidate {
    std::string id;
    double utility = 0.0;
    TagSet tags;
    std::int64_t exposure_count = 0;
    double group_frequency = 0.0;
    std::int64_t justification_depth = 0;
    std::int64_t plan_length = 0;
    double covert_gain = 0.0;

    friend bool operator==(const ActionCandidate&, const ActionCandidate&) = default;
};

struct DecisionContext {
    std::vector<ActionCandidate> candidates;
    std::optional<std::string> prior_choice;
    std::map<std::string, double> initial_values;
    double observation_prob = 0.0;
    std::map<std::string, double> evidence_alignment;

    const ActionCandidate* find(std::string_view id) const;
    double effective_utility(const ActionCandidate& c) const;

    friend bool operator==(const DecisionContext&, const DecisionContext&) = default;
};

// Throws RangeError when the context breaks its invariants.
void validate_context(const DecisionContext& ctx);

enum class BiasId : std::uint8_t {
    PlanningFallacy,
    Bandwagon,
    Confirmation,
    Conservatism,
    Courtesy,
    FunctionalFixedness,
    Information,
    MereExposure,
    Omission,
    StatusQuo,
    Authority,
    SystemJustification,
    ProcessingDifficulty,
    Spotlight,
};

inline constexpr std::array<BiasId, 14> kAllBiases{
    BiasId::PlanningFallacy, BiasId::Bandwagon,   BiasId::Confirmation,        BiasId::Conservatism,
    BiasId::Courtesy,        BiasId::FunctionalFixedness, BiasId::Information,  BiasId::MereExposure,
    BiasId::Omission,        BiasId::StatusQuo,   BiasId::Authority,           BiasId::SystemJustification,
    BiasId::ProcessingDifficulty, BiasId::Spotlight};

std::string_view to_string(BiasId id);
// Throws UnknownBias.
BiasId parse_bias(std::string_view name);

// Belief-level biases first, then utility-level.
const std::vector<BiasId>& default_bias_order();

struct EmtCosts {
    double false_positive_cost = 1.0;
    double false_negative_cost = 1.0;
};

struct BiasConfig {
    std::map<BiasId, double> weights;
    std::vector<BiasId> order = default_bias_order();
    double mistake_rate = 0.0;
    EmtCosts emt;
    double act_penalty = 1.0;        // omission: penalty per unit weight on harmful acts
    double omission_penalty = 0.25;  // ... and on harmful omissions
    std::int64_t planning_horizon = 3;

    double weight(BiasId id) const;
    void set_weight(BiasId id, double w) { weights[id] = w; }
};

// Throws ConfigError describing the first broken invariant.
void validate_bias_config(const BiasConfig& cfg);

// Reads the [biases] section: one `<bias_id> = weight` per bias, plus
// `order`, `mistake_rate`, `emt_false_positive_cost`, `emt_false_negative_cost`,
// `act_penalty`, `omission_penalty`, `planning_horizon`.
BiasConfig load_bias_config(const Config& cfg, std::string_view section = "biases");
std::string canonical_bias_text(const BiasConfig& cfg);

DecisionContext apply_bias(BiasId id, const DecisionContext& ctx, const BiasConfig& cfg);
DecisionContext apply_bias(std::string_view id, const DecisionContext& ctx, const BiasConfig& cfg);

struct AppliedBias {
    BiasId id;
    double max_abs_delta = 0.0;  // largest change in any candidate's effective utility
};

struct Decision {
    std::string chosen;
    DecisionContext adjusted;
    std::vector<double> effective_utilities;  // parallel to adjusted.candidates
    std::vector<AppliedBias> applied;
};

// Argmax of effective utility; ties go to the noop candidate if it is among
// them, else to the lexicographically smallest id.
std::string select_action(const DecisionContext& ctx);

Decision apply_pipeline(const DecisionContext& ctx, const BiasConfig& cfg);

enum class EmtChoice { Act, Refrain };

struct EmtOutcome {
    EmtChoice choice = EmtChoice::Refrain;
    bool indifferent = false;
};

// Treat-as-threat iff p * FN > (1 - p) * FP. Equal expected costs (including
// both costs zero) are reported as indifferent and resolve to refrain.
EmtOutcome emt_decide(double p_threat, const EmtCosts& costs);

// With probability 1 - mistake_rate returns `correct`; otherwise shifts one of
// its two lowest decimal digits by one. Pure in (correct, mistake_rate, seed).
std::int64_t inject_mistake(std::int64_t correct, double mistake_rate, std::uint64_t seed);

}  // namespace asbox
