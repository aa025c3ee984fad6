#pragma once

#include "semopt/plan_ir.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace semopt {

enum class SemanticKind { filter, map };

const char* to_string(SemanticKind kind);
SemanticKind semantic_kind_from_string(const std::string& name);

/// Map output equality: trimmed, case-folded exact match, or numeric match with
/// relative tolerance 1e-6 when both sides parse as numbers.
bool values_equal(const std::string& a, const std::string& b);

/// Everything profiling recorded about one candidate on the sample.
struct CandidateProfile {
    PhysicalCandidate candidate;
    /// Filters: raw decision score per tuple (log-odds or similarity); direct_value
    /// filters record 1 for accept and 0 for reject.
    std::vector<double> scores;
    /// Maps: extracted value per tuple.
    std::vector<std::string> outputs;
    /// Amortized runtime per tuple.
    std::vector<double> runtimes;
    /// Standardization of `scores` on the sample (thresholds are optimized in these units).
    double score_center = 0.0;
    double score_spread = 1.0;

    void standardize();
    double standardized(std::size_t t) const { return (scores[t] - score_center) / score_spread; }
};

struct OperatorProfile {
    std::string operator_id;
    SemanticKind kind = SemanticKind::filter;
    /// Sorted by ascending cost; the gold candidate is last.
    std::vector<CandidateProfile> candidates;
    std::vector<std::uint8_t> gold_labels;  // filters
    std::vector<std::string> gold_values;   // maps

    /// Maps: match_cache[c][t] caches output_matches; filled by ProfileMatrix::finalize.
    std::vector<std::vector<std::uint8_t>> match_cache;

    const CandidateProfile& gold() const { return candidates.back(); }
    /// Whether candidate c's output on tuple t equals the gold value (maps).
    bool output_matches(std::size_t c, std::size_t t) const;
};

/// Profiling output over a sample S of the semantic pipeline's input. Operators are
/// stored in pipeline order.
struct ProfileMatrix {
    std::vector<std::string> tuple_keys;
    std::vector<std::uint32_t> token_lengths;
    std::vector<OperatorProfile> operators;
    std::size_t population_size = 0;
    double sample_fraction = 1.0;

    std::size_t size() const { return tuple_keys.size(); }

    /// Tuples that the gold plan keeps: accepted by every gold filter.
    std::vector<std::uint8_t> gold_positive() const;

    /// A matrix containing only operator k, its own gold labels serving as the
    /// plan-level ground truth.
    ProfileMatrix single_operator(std::size_t k) const;

    /// Sum of all candidates' per-tuple costs (normalizer of the cost loss).
    double total_candidate_cost() const;

    /// Sorts candidates by cost (gold last), recomputes standardization, and checks
    /// completeness. Throws InvalidInput on missing cells.
    void finalize();
    void validate() const;
};

} // namespace semopt
