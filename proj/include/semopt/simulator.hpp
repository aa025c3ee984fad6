#pragma once

#include "semopt/optimizer.hpp"
#include "semopt/plan_ir.hpp"
#include "semopt/profile_matrix.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace semopt {

/// A tuple. `keys` lists the base rows it was built from, sorted by table name;
/// columns are qualified as "<table>.<column>" except for map outputs.
struct Row {
    std::vector<std::pair<std::string, std::uint32_t>> keys;
    std::map<std::string, std::string> columns;
    std::uint32_t token_length = 0;

    std::string key() const;
    /// Key restricted to the given tables.
    std::string key_over(const std::vector<std::string>& tables) const;
};

struct Table {
    std::string name;
    std::vector<Row> rows;
};

enum class ScoreStyle { log_odds, similarity };

const char* to_string(ScoreStyle s);
ScoreStyle score_style_from_string(const std::string& name);

/// Ground truth and difficulty of one semantic predicate.
struct SyntheticTask {
    std::string predicate_id;
    SemanticKind kind = SemanticKind::filter;
    /// Filters: fraction of gold-positive tuples.
    double base_rate = 0.5;
    /// Class separation of a full-quality model in noise standard deviations; larger
    /// is easier.
    double difficulty = 3.0;
    /// Maps: output vocabulary.
    std::vector<std::string> vocabulary;
    /// Tables whose base rows determine the outcome.
    std::vector<std::string> scope;
    /// Separation shrinks by this factor on tuples that are positive for the
    /// `correlated_with` predicate.
    std::string correlated_with;
    double correlation_penalty = 0.0;

    void validate() const;
};

/// One rung of the model-size x compression ladder.
struct CostProfile {
    std::string id;
    double model_size = 8.0;
    double compression_ratio = 0.0;
    double per_token_cost = 0.001;
    /// Cache memory per token of input.
    double cache_footprint = 1.0;
    double memory_budget = 4000.0;
    /// Separation multiplier at ratio 0 and its loss per unit of compression.
    double quality = 1.0;
    double degradation = 0.0;
    ScoreStyle style = ScoreStyle::log_odds;
    bool is_gold = false;

    double separation_factor() const { return quality / (1.0 + compression_ratio * degradation); }
    /// Items of the given length that fit in one batch (at least 1).
    std::size_t capacity(double token_length) const;
    /// Runtime per item when batches hold items of this length.
    double amortized_cost(double token_length) const;

    void validate() const;
};

/// Small and large model at their compression ratios plus the gold profile.
std::vector<CostProfile> default_ladder();
/// Only the uncompressed rungs of default_ladder().
std::vector<CostProfile> uncompressed_ladder();

/// Greedy in-order batching: an item joins the open batch while the batch still fits
/// floor(memory_budget / largest item footprint) items. Each batch costs
/// per_token_cost * longest length * model_size.
double batch_cost(const CostProfile& profile, std::span<const std::uint32_t> token_lengths);

struct Dataset {
    std::uint64_t seed = 0;
    std::vector<Table> tables;
    std::map<std::string, SyntheticTask> tasks;
    std::vector<CostProfile> profiles;

    const Table& table(const std::string& name) const;
    const SyntheticTask& task(const std::string& predicate_id) const;
    const CostProfile& profile(const std::string& id) const;
    const CostProfile& gold_profile() const;
};

// Deterministic model behaviour: pure functions of (seed, predicate, profile, row).
bool gold_label(const Dataset& data, const SyntheticTask& task, const Row& row);
std::string gold_value(const Dataset& data, const SyntheticTask& task, const Row& row);
/// Probability that a profile agrees with gold on a tuple of the task.
double agreement(const SyntheticTask& task, const CostProfile& profile, bool correlated_positive = false);
/// Filter decision score (log-odds, or a similarity in roughly [0,1]).
double candidate_score(const Dataset& data, const SyntheticTask& task, const CostProfile& profile, const Row& row);
std::string candidate_value(const Dataset& data, const SyntheticTask& task, const CostProfile& profile,
                            const Row& row);

struct WorkloadOptions {
    /// Rows reaching the semantic pipeline, approximately.
    std::size_t rows = 1200;
    std::vector<CostProfile> ladder = default_ladder();
    double correlation_penalty = 0.3;
};

struct QueryInstance {
    std::string query_id;
    std::string family;
    std::uint64_t seed = 0;
    Dataset dataset;
    LogicalPlan plan;
};

const std::vector<std::string>& workload_families();

/// One query of the named family with its own dataset; regenerates until the gold
/// result is nonempty.
QueryInstance generate_query(const std::string& family, std::uint64_t seed, const WorkloadOptions& options = {},
                             const std::string& query_id = "q0");

/// `count` queries cycling through `families` (all families when empty).
std::vector<QueryInstance> generate_workload(std::size_t count, std::uint64_t seed,
                                             const std::vector<std::string>& families = {},
                                             const WorkloadOptions& options = {});

/// Query result: tuple key -> values of map output columns.
using ResultSet = std::map<std::string, std::map<std::string, std::string>>;

/// Executes every operator exactly, semantic ones with their gold behaviour.
ResultSet execute_gold(const LogicalPlan& plan, const Dataset& data);

/// Plan after join rewrite and pull-up, with the rows entering its semantic pipeline.
struct PreparedQuery {
    LogicalPlan plan;
    std::vector<std::string> pipeline;
    std::vector<Row> input;
};

PreparedQuery prepare_query(const LogicalPlan& plan, const Dataset& data);

/// Physical candidates of one pipeline operator: one per ladder profile.
/// Each candidate's cost is its mean amortized runtime over the given tuple lengths.
std::vector<PhysicalCandidate> candidate_catalog(const LogicalOperator& op, const Dataset& data,
                                                 std::span<const std::uint32_t> token_lengths);

struct ProfileOptions {
    double sample_fraction = 0.15;
    std::uint64_t seed = 0;
    /// Drop candidates whose (cost, quality) on the sample is Pareto-dominated.
    bool prune_dominated = true;
};

/// Samples the pipeline input uniformly without replacement and runs every candidate
/// of every pipeline operator on it.
ProfileMatrix profile_query(const PreparedQuery& query, const Dataset& data, const ProfileOptions& options = {});

struct StageExecution {
    std::size_t op = 0;
    std::size_t stage = 0;
    std::string candidate_id;
    std::size_t processed = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t unsure = 0;
    double cost = 0.0;
};

struct ExecutionResult {
    ResultSet results;
    double cost = 0.0;
    std::vector<StageExecution> stages;
};

/// Hard cascade execution over the pipeline input, stage by stage in
/// plan.execution_order (operator then stage order when empty).
ExecutionResult execute_plan(const PreparedQuery& query, const Dataset& data, const OptimizedPlan& plan);

struct QualityReport {
    double recall = 0.0;
    double precision = 0.0;
    double target_met_recall = 0.0;
    double target_met_precision = 0.0;
    std::size_t result_size = 0;
    std::size_t gold_size = 0;
    double cost = 0.0;  // realized execution cost, when executed
};

/// Recall and precision of `result` against `gold`; an empty result has precision 1.
QualityReport compare_results(const ResultSet& result, const ResultSet& gold, const QualityTargets& targets);

/// Executes the plan and the gold plan on the full data and compares them.
QualityReport verify_on_holdout(const OptimizedPlan& plan, const QueryInstance& query,
                                const PreparedQuery& prepared);

} // namespace semopt
