#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace semopt {

enum class OperatorKind {
    scan,
    relational_filter,
    relational_join,
    cartesian_product,
    semantic_filter,
    semantic_map,
    semantic_join,
};

const char* to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);
bool is_semantic(OperatorKind kind);

enum class CompareOp { eq, ne, lt, le, gt, ge };

const char* to_string(CompareOp op);
CompareOp compare_op_from_string(const std::string& name);

/// column <op> literal; numeric comparison when both sides parse as numbers.
struct ColumnPredicate {
    std::string column;
    CompareOp op = CompareOp::eq;
    std::string value;

    bool matches(const std::string& cell) const;
};

struct QualityTargets {
    double recall = 0.9;
    double precision = 0.9;
    double alpha_recall = 0.95;
    double alpha_precision = 0.95;

    /// Throws InvalidInput unless targets lie in [0,1] and credible levels in (0,1).
    void validate() const;
};

struct LogicalOperator {
    std::string id;
    OperatorKind kind = OperatorKind::scan;
    std::string predicate_id;   // semantic kinds
    std::string output_column;  // semantic_map only
    std::string table;          // scan only
    std::optional<ColumnPredicate> filter;  // relational_filter only
    std::string left_column;    // relational_join only
    std::string right_column;   // relational_join only
    /// Additional declared column reads (a semantic filter over a mapped column, say).
    std::vector<std::string> reads;
    /// Base tables whose rows determine a semantic predicate's outcome. Fixed at the
    /// operator's original position so that rewrites cannot change its meaning.
    std::vector<std::string> scope;

    std::vector<std::string> read_columns() const;
    std::vector<std::string> written_columns() const;
};

/// DAG of logical operators. Edges run in data-flow direction (producer, consumer);
/// the plan has a single sink whose output is the query result.
class LogicalPlan {
public:
    std::vector<LogicalOperator> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    QualityTargets targets;

    /// Throws InvalidInput on dangling edges, cycles, multiple sinks, wrong arity,
    /// or per-kind field violations.
    void validate() const;

    std::size_t index_of(const std::string& id) const;
    const LogicalOperator& node(const std::string& id) const;
    /// Producers of `id` in edge order (left input first for binary operators).
    std::vector<std::string> inputs_of(const std::string& id) const;
    std::vector<std::string> consumers_of(const std::string& id) const;
    std::vector<std::string> topological_order() const;
    std::string sink() const;

    /// Fills empty `scope` fields of semantic operators from upstream scans.
    void annotate_scopes();

    /// Semantic operators forming the chain that ends at the sink, in execution order.
    std::vector<std::string> semantic_pipeline() const;

    /// Multiset of semantic predicate ids (sorted).
    std::vector<std::string> semantic_predicates() const;

    bool operator==(const LogicalPlan& other) const;
};

bool operator==(const LogicalOperator& a, const LogicalOperator& b);
bool operator==(const QualityTargets& a, const QualityTargets& b);
bool operator==(const ColumnPredicate& a, const ColumnPredicate& b);

/// Hoists semantic operators above the relational operators they commute with, so
/// that the plan becomes a relational prefix topped by one semantic pipeline. An
/// operator moves past a relational consumer only when that consumer neither reads
/// nor writes any column the semantic operator writes; otherwise it stays put.
LogicalPlan pull_up_semantic(const LogicalPlan& plan);

/// Replaces each semantic join by a cartesian product followed by a semantic filter
/// carrying the join predicate.
LogicalPlan rewrite_semantic_join(const LogicalPlan& plan);

enum class DecisionKind { two_threshold_score, direct_value };

const char* to_string(DecisionKind kind);
DecisionKind decision_kind_from_string(const std::string& name);

/// One implementation of a logical semantic operator.
struct PhysicalCandidate {
    std::string id;
    std::string implements;  // LogicalOperator id
    std::string profile;     // CostProfile id
    DecisionKind decision_kind = DecisionKind::two_threshold_score;
    double cost_per_tuple = 0.0;
    bool is_gold = false;
};

/// Checks the per-operator catalog rules: nonnegative costs, exactly one gold
/// candidate per operator, and the gold candidate being the most expensive.
void validate_candidates(const std::vector<PhysicalCandidate>& candidates);

} // namespace semopt
