#include "semopt/profile_matrix.hpp"

#include "semopt/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace semopt {

namespace {

std::string normalize(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<double> as_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace

const char* to_string(SemanticKind kind) { return kind == SemanticKind::filter ? "filter" : "map"; }

SemanticKind semantic_kind_from_string(const std::string& name) {
    if (name == "filter") return SemanticKind::filter;
    if (name == "map") return SemanticKind::map;
    throw InvalidInput("unknown semantic kind '" + name + "'");
}

bool values_equal(const std::string& a, const std::string& b) {
    const std::string na = normalize(a);
    const std::string nb = normalize(b);
    if (na == nb) return true;
    const auto x = as_number(na);
    const auto y = as_number(nb);
    if (x && y) {
        const double scale = std::max(std::fabs(*x), std::fabs(*y));
        return std::fabs(*x - *y) <= 1e-6 * scale;
    }
    return false;
}

void CandidateProfile::standardize() {
    if (scores.empty()) {
        score_center = 0.0;
        score_spread = 1.0;
        return;
    }
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    score_center = mean;
    score_spread = var > 1e-18 ? std::sqrt(var) : 1.0;
}

bool OperatorProfile::output_matches(std::size_t c, std::size_t t) const {
    if (c < match_cache.size() && t < match_cache[c].size()) return match_cache[c][t] != 0;
    return values_equal(candidates[c].outputs[t], gold_values[t]);
}

std::vector<std::uint8_t> ProfileMatrix::gold_positive() const {
    std::vector<std::uint8_t> positive(size(), 1);
    for (const auto& op : operators) {
        if (op.kind != SemanticKind::filter) continue;
        for (std::size_t t = 0; t < size(); ++t) {
            positive[t] = positive[t] && op.gold_labels[t];
        }
    }
    return positive;
}

ProfileMatrix ProfileMatrix::single_operator(std::size_t k) const {
    ProfileMatrix out;
    out.tuple_keys = tuple_keys;
    out.token_lengths = token_lengths;
    out.operators = {operators.at(k)};
    out.population_size = population_size;
    out.sample_fraction = sample_fraction;
    return out;
}

double ProfileMatrix::total_candidate_cost() const {
    double total = 0.0;
    for (const auto& op : operators) {
        for (const auto& c : op.candidates) total += c.candidate.cost_per_tuple;
    }
    return total;
}

void ProfileMatrix::finalize() {
    for (auto& op : operators) {
        std::stable_sort(op.candidates.begin(), op.candidates.end(), [](const auto& x, const auto& y) {
            if (x.candidate.is_gold != y.candidate.is_gold) return !x.candidate.is_gold;
            return x.candidate.cost_per_tuple < y.candidate.cost_per_tuple;
        });
        for (auto& c : op.candidates) {
            if (op.kind == SemanticKind::filter && c.candidate.decision_kind == DecisionKind::two_threshold_score) {
                c.standardize();
            }
        }
    }
    validate();
    for (auto& op : operators) {
        op.match_cache.clear();
        if (op.kind != SemanticKind::map) continue;
        for (const auto& c : op.candidates) {
            std::vector<std::uint8_t> row;
            for (std::size_t t = 0; t < size(); ++t) row.push_back(values_equal(c.outputs[t], op.gold_values[t]));
            op.match_cache.push_back(std::move(row));
        }
    }
}

void ProfileMatrix::validate() const {
    const std::size_t n = size();
    if (token_lengths.size() != n) {
        throw InvalidInput("profile matrix: token lengths do not cover the sample");
    }
    if (operators.empty()) {
        throw InvalidInput("profile matrix has no semantic operators");
    }
    for (const auto& op : operators) {
        if (op.candidates.empty() || !op.candidates.back().candidate.is_gold) {
            throw InvalidInput("operator '" + op.operator_id + "' has no gold column");
        }
        std::vector<PhysicalCandidate> cands;
        for (const auto& c : op.candidates) cands.push_back(c.candidate);
        validate_candidates(cands);
        if (op.kind == SemanticKind::filter && op.gold_labels.size() != n) {
            throw InvalidInput("operator '" + op.operator_id + "' lacks gold labels");
        }
        if (op.kind == SemanticKind::map && op.gold_values.size() != n) {
            throw InvalidInput("operator '" + op.operator_id + "' lacks gold values");
        }
        for (const auto& c : op.candidates) {
            const bool cells_ok = c.runtimes.size() == n &&
                                  (op.kind == SemanticKind::filter ? c.scores.size() == n : c.outputs.size() == n);
            if (!cells_ok) {
                throw InvalidInput("profile matrix: missing cells for candidate '" + c.candidate.id + "'");
            }
        }
    }
}

} // namespace semopt
