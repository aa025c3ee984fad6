#pragma once

// Random instances shared by the unit and acceptance suites.

#include "semopt/optimizer.hpp"
#include "semopt/profile_matrix.hpp"
#include "semopt/soft_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace semopt::testing {

struct InstanceShape {
    std::size_t tuples = 30;
    std::size_t filters = 2;
    std::size_t maps = 0;
    /// Non-gold candidates per operator.
    std::size_t candidates = 2;
    /// Every third non-gold filter candidate decides directly instead of scoring.
    bool with_direct = false;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline CandidateProfile scored_candidate(std::mt19937_64& rng, const std::string& op, std::size_t idx,
                                         const std::vector<std::uint8_t>& labels, double cost) {
    CandidateProfile cp;
    cp.candidate = {op + "@c" + std::to_string(idx), op, "c" + std::to_string(idx), DecisionKind::two_threshold_score,
                    cost, false};
    const double sep = uniform(rng, 0.5, 4.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto y : labels) {
        cp.scores.push_back((y ? sep / 2 : -sep / 2) + noise(rng));
        cp.runtimes.push_back(cost);
    }
    return cp;
}

/// Filters first, then maps, with costs strictly below the gold cost of 1.
inline ProfileMatrix random_profile(std::mt19937_64& rng, const InstanceShape& shape) {
    ProfileMatrix pm;
    for (std::size_t t = 0; t < shape.tuples; ++t) {
        pm.tuple_keys.push_back("t" + std::to_string(t));
        pm.token_lengths.push_back(static_cast<std::uint32_t>(50 + t % 7 * 10));
    }
    pm.population_size = shape.tuples * 5;
    pm.sample_fraction = 0.2;
    for (std::size_t f = 0; f < shape.filters; ++f) {
        OperatorProfile op;
        op.operator_id = "f" + std::to_string(f);
        op.kind = SemanticKind::filter;
        const double base = uniform(rng, 0.4, 0.85);
        for (std::size_t t = 0; t < shape.tuples; ++t) op.gold_labels.push_back(uniform(rng, 0, 1) < base);
        for (std::size_t c = 0; c < shape.candidates; ++c) {
            const double cost = uniform(rng, 0.02, 0.6);
            if (shape.with_direct && c % 3 == 2) {
                CandidateProfile cp;
                cp.candidate = {op.operator_id + "@d" + std::to_string(c), op.operator_id, "d", DecisionKind::direct_value,
                                cost, false};
                for (auto y : op.gold_labels) {
                    cp.scores.push_back(uniform(rng, 0, 1) < 0.85 ? y : 1 - y);
                    cp.runtimes.push_back(cost);
                }
                op.candidates.push_back(std::move(cp));
            } else {
                op.candidates.push_back(scored_candidate(rng, op.operator_id, c, op.gold_labels, cost));
            }
        }
        CandidateProfile gold;
        gold.candidate = {op.operator_id + "@gold", op.operator_id, "gold", DecisionKind::direct_value, 1.0, true};
        for (auto y : op.gold_labels) {
            gold.scores.push_back(y);
            gold.runtimes.push_back(1.0);
        }
        op.candidates.push_back(std::move(gold));
        pm.operators.push_back(std::move(op));
    }
    const std::vector<std::string> vocab{"red", "green", "blue", "amber"};
    for (std::size_t m = 0; m < shape.maps; ++m) {
        OperatorProfile op;
        op.operator_id = "m" + std::to_string(m);
        op.kind = SemanticKind::map;
        for (std::size_t t = 0; t < shape.tuples; ++t) op.gold_values.push_back(vocab[rng() % vocab.size()]);
        for (std::size_t c = 0; c <= shape.candidates; ++c) {
            const bool gold = c == shape.candidates;
            const double cost = gold ? 1.0 : uniform(rng, 0.02, 0.6);
            const double acc = uniform(rng, 0.5, 0.95);
            CandidateProfile cp;
            cp.candidate = {op.operator_id + (gold ? "@gold" : "@c" + std::to_string(c)), op.operator_id,
                            gold ? "gold" : "c", DecisionKind::direct_value, cost, gold};
            for (std::size_t t = 0; t < shape.tuples; ++t) {
                cp.outputs.push_back(gold || uniform(rng, 0, 1) < acc ? op.gold_values[t] : vocab[rng() % vocab.size()]);
                cp.runtimes.push_back(cost);
            }
            op.candidates.push_back(std::move(cp));
        }
        pm.operators.push_back(std::move(op));
    }
    pm.finalize();
    return pm;
}

/// Parameters drawn uniformly in moderate ranges around the initial configuration.
inline std::vector<double> random_params(std::mt19937_64& rng, const ProfileMatrix& pm, const ParameterLayout& layout) {
    std::vector<double> p(layout.size(), 0.0);
    for (std::size_t o = 0; o < pm.operators.size(); ++o) {
        for (std::size_t c = 0; c < pm.operators[o].candidates.size(); ++c) {
            const auto& s = layout.slots(o, c);
            if (s.pick != ParameterLayout::kNone) p[s.pick] = uniform(rng, -2.0, 2.0);
            if (s.theta_lo != ParameterLayout::kNone) p[s.theta_lo] = uniform(rng, -1.5, 0.5);
            if (s.gap != ParameterLayout::kNone) p[s.gap] = uniform(rng, -1.0, 1.5);
        }
    }
    return p;
}

/// Smallest distance, in standardized units, between any scored candidate's threshold
/// and any sample score.
inline double threshold_margin(const ProfileMatrix& pm, const RelaxedConfig& cfg) {
    double margin = 1e300;
    for (std::size_t o = 0; o < pm.operators.size(); ++o) {
        for (std::size_t c = 0; c < pm.operators[o].candidates.size(); ++c) {
            const auto& cp = pm.operators[o].candidates[c];
            if (cp.candidate.decision_kind != DecisionKind::two_threshold_score) continue;
            for (std::size_t t = 0; t < pm.size(); ++t) {
                const double z = cp.standardized(t);
                margin = std::min({margin, std::fabs(z - cfg.operators[o][c].theta_lo), std::fabs(z - cfg.theta_hi(o, c))});
            }
        }
    }
    return margin;
}

/// Random parameters with every threshold at least 2e-3 from every sample score and
/// pick scores saturated at +-10 (maps get a unique winner). At tau = 1e-4 this leaves
/// under 1e-8 of unresolved mass per tuple.
inline std::vector<double> saturated_params(std::mt19937_64& rng, const ProfileMatrix& pm, const ParameterLayout& layout) {
    auto p = random_params(rng, pm, layout);
    while (threshold_margin(pm, layout.unpack(p, 1.0)) < 2e-3) p = random_params(rng, pm, layout);
    for (std::size_t o = 0; o < pm.operators.size(); ++o) {
        const bool map = pm.operators[o].kind == SemanticKind::map;
        const std::size_t winner = rng() % pm.operators[o].candidates.size();
        for (std::size_t c = 0; c < pm.operators[o].candidates.size(); ++c) {
            const int slot = layout.slots(o, c).pick;
            if (slot == ParameterLayout::kNone) continue;
            p[slot] = map ? (c == winner ? 10.0 : -10.0) : (p[slot] > 0 ? 10.0 : -10.0);
        }
    }
    return p;
}

inline bool meets(const SampleBounds& b, const QualityTargets& t) {
    return b.recall >= t.recall && b.precision >= t.precision;
}

} // namespace semopt::testing
