#include "asbox/biases.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "asbox/errors.hpp"
#include "asbox/rng.hpp"

namespace asbox {

namespace {

constexpr std::array<std::pair<Tag, std::string_view>, kTagCount> kTagNames{{
    {Tag::Noop, "noop"},
    {Tag::Aggressive, "aggressive"},
    {Tag::HarmfulAct, "harmful-act"},
    {Tag::HarmfulOmission, "harmful-omission"},
    {Tag::InformationGathering, "information-gathering"},
    {Tag::EnvironmentAltering, "environment-altering"},
    {Tag::AuthorityEndorsed, "authority-endorsed"},
    {Tag::CanonicalUse, "canonical-use"},
    {Tag::NovelUse, "novel-use"},
}};

constexpr std::array<std::pair<BiasId, std::string_view>, 14> kBiasNames{{
    {BiasId::PlanningFallacy, "planning_fallacy"},
    {BiasId::Bandwagon, "bandwagon"},
    {BiasId::Confirmation, "confirmation"},
    {BiasId::Conservatism, "conservatism"},
    {BiasId::Courtesy, "courtesy"},
    {BiasId::FunctionalFixedness, "functional_fixedness"},
    {BiasId::Information, "information"},
    {BiasId::MereExposure, "mere_exposure"},
    {BiasId::Omission, "omission"},
    {BiasId::StatusQuo, "status_quo"},
    {BiasId::Authority, "authority"},
    {BiasId::SystemJustification, "system_justification"},
    {BiasId::ProcessingDifficulty, "processing_difficulty"},
    {BiasId::Spotlight, "spotlight"},
}};

double lookup(const std::map<std::string, double>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? 0.0 : it->second;
}

}  // namespace

std::string_view to_string(Tag t) {
    for (const auto& [tag, name] : kTagNames) {
        if (tag == t) return name;
    }
    return "unknown";
}

std::optional<Tag> parse_tag(std::string_view name) {
    for (const auto& [tag, n] : kTagNames) {
        if (n == name) return tag;
    }
    return std::nullopt;
}

std::string_view to_string(BiasId id) {
    for (const auto& [b, name] : kBiasNames) {
        if (b == id) return name;
    }
    return "unknown";
}

BiasId parse_bias(std::string_view name) {
    for (const auto& [b, n] : kBiasNames) {
        if (n == name) return b;
    }
    throw UnknownBias("unknown bias '" + std::string(name) + "'");
}

const std::vector<BiasId>& default_bias_order() {
    static const std::vector<BiasId> order{
        BiasId::Spotlight,       BiasId::Confirmation, BiasId::Conservatism,        BiasId::PlanningFallacy,
        BiasId::StatusQuo,       BiasId::Omission,     BiasId::Courtesy,            BiasId::FunctionalFixedness,
        BiasId::Information,     BiasId::MereExposure, BiasId::Bandwagon,           BiasId::Authority,
        BiasId::SystemJustification, BiasId::ProcessingDifficulty,
    };
    return order;
}

const ActionCandidate* DecisionContext::find(std::string_view id) const {
    for (const auto& c : candidates) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

double DecisionContext::effective_utility(const ActionCandidate& c) const {
    if (c.covert_gain == 0.0) return c.utility;
    return c.utility + c.covert_gain * (1.0 - observation_prob);
}

void validate_context(const DecisionContext& ctx) {
    if (ctx.candidates.empty()) throw RangeError("decision context has no candidates");
    std::set<std::string> ids;
    int noops = 0;
    for (const auto& c : ctx.candidates) {
        if (!ids.insert(c.id).second) throw RangeError("duplicate candidate id '" + c.id + "'");
        if (!std::isfinite(c.utility) || !std::isfinite(c.covert_gain)) throw RangeError("candidate utility must be finite");
        if (c.exposure_count < 0 || c.justification_depth < 0 || c.plan_length < 0) {
            throw RangeError("candidate counts must be non-negative");
        }
        if (!(c.group_frequency >= 0.0 && c.group_frequency <= 1.0)) throw RangeError("group_frequency must lie in [0,1]");
        if (c.tags.has(Tag::Noop)) ++noops;
    }
    if (noops > 1) throw RangeError("at most one candidate may be tagged noop");
    if (!(ctx.observation_prob >= 0.0 && ctx.observation_prob <= 1.0)) throw RangeError("observation_prob must lie in [0,1]");
    for (const auto& [id, v] : ctx.evidence_alignment) {
        if (!(v >= -1.0 && v <= 1.0)) throw RangeError("evidence_alignment must lie in [-1,1]");
    }
    for (const auto& [id, v] : ctx.initial_values) {
        if (!std::isfinite(v)) throw RangeError("initial values must be finite");
    }
}

double BiasConfig::weight(BiasId id) const {
    auto it = weights.find(id);
    return it == weights.end() ? 0.0 : it->second;
}

void validate_bias_config(const BiasConfig& cfg) {
    std::set<BiasId> seen;
    for (BiasId id : cfg.order) {
        if (!seen.insert(id).second) throw ConfigError("bias '" + std::string(to_string(id)) + "' repeated in order");
    }
    for (const auto& [id, w] : cfg.weights) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("bias weight for '" + std::string(to_string(id)) + "' must be >= 0");
        if (w > 0.0 && seen.count(id) == 0) {
            throw ConfigError("enabled bias '" + std::string(to_string(id)) + "' missing from pipeline order");
        }
    }
    if (!(cfg.mistake_rate >= 0.0 && cfg.mistake_rate < 1.0)) throw ConfigError("mistake_rate must lie in [0,1)");
    if (!(cfg.emt.false_positive_cost >= 0.0) || !(cfg.emt.false_negative_cost >= 0.0)) {
        throw ConfigError("EMT costs must be non-negative");
    }
    if (!(cfg.act_penalty >= 0.0) || !(cfg.omission_penalty >= 0.0)) throw ConfigError("omission penalties must be non-negative");
    if (cfg.planning_horizon < 0) throw ConfigError("planning_horizon must be non-negative");
}

BiasConfig load_bias_config(const Config& cfg, std::string_view section) {
    BiasConfig out;
    for (const auto& [key, value] : cfg.section(section)) {
        if (key == "order") {
            out.order.clear();
            for (const auto& name : split_list(value)) out.order.push_back(parse_bias(name));
        } else if (key == "mistake_rate") {
            out.mistake_rate = parse_number(value);
        } else if (key == "emt_false_positive_cost") {
            out.emt.false_positive_cost = parse_number(value);
        } else if (key == "emt_false_negative_cost") {
            out.emt.false_negative_cost = parse_number(value);
        } else if (key == "act_penalty") {
            out.act_penalty = parse_number(value);
        } else if (key == "omission_penalty") {
            out.omission_penalty = parse_number(value);
        } else if (key == "planning_horizon") {
            out.planning_horizon = parse_integer(value);
        } else {
            out.weights[parse_bias(key)] = parse_number(value);
        }
    }
    validate_bias_config(out);
    return out;
}

std::string canonical_bias_text(const BiasConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "act_penalty = " << cfg.act_penalty << '\n';
    os << "emt_false_negative_cost = " << cfg.emt.false_negative_cost << '\n';
    os << "emt_false_positive_cost = " << cfg.emt.false_positive_cost << '\n';
    os << "mistake_rate = " << cfg.mistake_rate << '\n';
    os << "omission_penalty = " << cfg.omission_penalty << '\n';
    os << "order = ";
    for (std::size_t i = 0; i < cfg.order.size(); ++i) os << (i ? ", " : "") << to_string(cfg.order[i]);
    os << '\n';
    os << "planning_horizon = " << cfg.planning_horizon << '\n';
    std::map<std::string_view, double> sorted;
    for (const auto& [id, w] : cfg.weights) sorted[to_string(id)] = w;
    for (const auto& [name, w] : sorted) os << name << " = " << w << '\n';
    return os.str();
}

DecisionContext apply_bias(BiasId id, const DecisionContext& ctx, const BiasConfig& cfg) {
    double w = cfg.weight(id);
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("bias weight must be >= 0");
    DecisionContext out = ctx;
    if (w == 0.0) return out;

    auto each = [&](auto&& fn) {
        for (auto& c : out.candidates) fn(c);
    };
    switch (id) {
        case BiasId::StatusQuo:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::Noop) || (ctx.prior_choice && c.id == *ctx.prior_choice)) c.utility += w;
            });
            break;
        case BiasId::Omission:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::HarmfulAct)) c.utility -= w * cfg.act_penalty;
                if (c.tags.has(Tag::HarmfulOmission)) c.utility -= w * cfg.omission_penalty;
            });
            break;
        case BiasId::Spotlight:
            out.observation_prob = std::min(1.0, ctx.observation_prob + w * (1.0 - ctx.observation_prob));
            break;
        case BiasId::Courtesy:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::Aggressive)) c.utility -= w;
            });
            break;
        case BiasId::FunctionalFixedness:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::NovelUse)) c.utility -= w;
            });
            break;
        case BiasId::Information:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::InformationGathering)) c.utility += w;
            });
            break;
        case BiasId::MereExposure:
            each([&](ActionCandidate& c) { c.utility += w * std::log1p(static_cast<double>(c.exposure_count)); });
            break;
        case BiasId::Conservatism: {
            double blend = std::min(w, 1.0);
            each([&](ActionCandidate& c) {
                auto it = ctx.initial_values.find(c.id);
                if (it != ctx.initial_values.end()) c.utility = (1.0 - blend) * c.utility + blend * it->second;
            });
            break;
        }
        case BiasId::Bandwagon:
            each([&](ActionCandidate& c) { c.utility += w * c.group_frequency; });
            break;
        case BiasId::Confirmation:
            each([&](ActionCandidate& c) { c.utility += w * lookup(ctx.evidence_alignment, c.id); });
            break;
        case BiasId::Authority:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::AuthorityEndorsed)) c.utility += w;
            });
            break;
        case BiasId::SystemJustification:
            each([&](ActionCandidate& c) {
                if (c.tags.has(Tag::EnvironmentAltering)) c.utility -= w;
            });
            break;
        case BiasId::ProcessingDifficulty:
            each([&](ActionCandidate& c) { c.utility += w * std::log1p(static_cast<double>(c.justification_depth)); });
            break;
        case BiasId::PlanningFallacy:
            each([&](ActionCandidate& c) {
                auto excess = std::max<std::int64_t>(0, c.plan_length - cfg.planning_horizon);
                c.utility -= w * static_cast<double>(excess);
            });
            break;
    }
    return out;
}

DecisionContext apply_bias(std::string_view id, const DecisionContext& ctx, const BiasConfig& cfg) {
    return apply_bias(parse_bias(id), ctx, cfg);
}

std::string select_action(const DecisionContext& ctx) {
    if (ctx.candidates.empty()) throw RangeError("decision context has no candidates");
    const ActionCandidate* best = nullptr;
    double best_u = 0.0;
    for (const auto& c : ctx.candidates) {
        double u = ctx.effective_utility(c);
        bool better = best == nullptr || u > best_u;
        if (!better && u == best_u) {
            bool c_noop = c.tags.has(Tag::Noop);
            bool b_noop = best->tags.has(Tag::Noop);
            better = (c_noop && !b_noop) || (c_noop == b_noop && c.id < best->id);
        }
        if (better) {
            best = &c;
            best_u = u;
        }
    }
    return best->id;
}

Decision apply_pipeline(const DecisionContext& ctx, const BiasConfig& cfg) {
    validate_bias_config(cfg);
    validate_context(ctx);
    Decision d;
    d.adjusted = ctx;
    for (BiasId id : cfg.order) {
        if (cfg.weight(id) == 0.0) continue;
        DecisionContext next = apply_bias(id, d.adjusted, cfg);
        double delta = 0.0;
        for (std::size_t i = 0; i < next.candidates.size(); ++i) {
            double before = d.adjusted.effective_utility(d.adjusted.candidates[i]);
            double after = next.effective_utility(next.candidates[i]);
            delta = std::max(delta, std::fabs(after - before));
        }
        d.applied.push_back({id, delta});
        d.adjusted = std::move(next);
    }
    for (const auto& c : d.adjusted.candidates) d.effective_utilities.push_back(d.adjusted.effective_utility(c));
    d.chosen = select_action(d.adjusted);
    return d;
}

EmtOutcome emt_decide(double p_threat, const EmtCosts& costs) {
    if (!(p_threat >= 0.0 && p_threat <= 1.0)) throw RangeError("p_threat must lie in [0,1]");
    if (!(costs.false_positive_cost >= 0.0) || !(costs.false_negative_cost >= 0.0)) {
        throw RangeError("EMT costs must be non-negative");
    }
    double refrain_cost = p_threat * costs.false_negative_cost;
    double act_cost = (1.0 - p_threat) * costs.false_positive_cost;
    if (refrain_cost > act_cost) return {EmtChoice::Act, false};
    return {EmtChoice::Refrain, refrain_cost == act_cost};
}

std::int64_t inject_mistake(std::int64_t correct, double mistake_rate, std::uint64_t seed) {
    if (!(mistake_rate >= 0.0 && mistake_rate < 1.0)) throw RangeError("mistake_rate must lie in [0,1)");
    CounterRng rng(seed);
    if (rng.uniform() >= mistake_rate) return correct;

    bool negative = correct < 0;
    // Magnitude in unsigned space so INT64_MIN is representable.
    std::uint64_t mag = negative ? ~static_cast<std::uint64_t>(correct) + 1 : static_cast<std::uint64_t>(correct);
    int digits = 1;
    for (std::uint64_t m = mag; m >= 10; m /= 10) ++digits;
    std::uint64_t place = rng.below(static_cast<std::uint64_t>(std::min(digits, 2))) == 0 ? 1 : 10;
    std::uint64_t digit = (mag / place) % 10;
    bool up = rng.below(2) == 0;
    if (digit == 9) up = false;
    if (digit == 0) up = true;
    constexpr auto kMax = static_cast<std::uint64_t>(INT64_MAX);
    if (up && mag > kMax - place) up = false;
    mag = up ? mag + place : mag - place;
    return negative ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
}

}  // namespace asbox
