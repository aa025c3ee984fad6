#pragma once

#include "semopt/optimizer.hpp"
#include "semopt/simulator.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semopt {

struct BenchOptions {
    /// One optimization per query and target pair.
    std::vector<QualityTargets> targets;
    Variant variant = Variant::global;
    std::size_t queries = 60;
    std::uint64_t seed = 0;
    /// Workload families to cycle through; all when empty.
    std::vector<std::string> families;
    WorkloadOptions workload;
    double sample_fraction = 0.15;
    OptimizerSettings optimizer;
    /// Worker threads; results do not depend on it.
    unsigned jobs = 1;

    /// Recall = precision targets 0.5, 0.7 and 0.9 at credible level `alpha`.
    static std::vector<QualityTargets> default_targets(double alpha = 0.95);
    void validate() const;
};

struct QueryResult {
    std::string query_id;
    std::string family;
    Variant variant = Variant::global;
    QualityTargets targets;
    PlanStatus status = PlanStatus::feasible;
    bool repaired = false;
    double cost = 0.0;       // realized on the full data
    double gold_cost = 0.0;  // gold-only plan on the same data
    double predicted_cost = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double target_met_recall = 0.0;
    double target_met_precision = 0.0;
    double recall_bound = 0.0;
    double precision_bound = 0.0;
    std::size_t sample_size = 0;
    std::size_t population_size = 0;
    double seconds = 0.0;

    bool meets_recall() const { return target_met_recall >= 1.0; }
    bool meets_precision() const { return target_met_precision >= 1.0; }
};

struct TargetSummary {
    double target_recall = 0.0;
    double target_precision = 0.0;
    std::size_t queries = 0;
    double fraction_met_recall = 0.0;
    double fraction_met_precision = 0.0;
    /// 5th percentile of the per-query Target Met ratios.
    double p5_target_met_recall = 0.0;
    double p5_target_met_precision = 0.0;
    double mean_cost = 0.0;
    double mean_gold_cost = 0.0;
    std::size_t infeasible = 0;
    std::size_t fallback = 0;
};

struct BenchReport {
    /// Ordered by target, then query.
    std::vector<QueryResult> results;
    std::vector<TargetSummary> summaries;
    double seconds = 0.0;
};

/// Identity of the i-th bench query: id "q<i>", family cycled from the options, seed
/// derived from (options.seed, i) alone.
struct QuerySpec {
    std::string query_id;
    std::string family;
    std::uint64_t seed = 0;
};
QuerySpec bench_query_spec(const BenchOptions& options, std::size_t i);

/// Seed of the profiling sample drawn for a query.
std::uint64_t sample_seed(const QueryInstance& query);

/// Whether the plan's hard bounds on the sample, recomputed the way its variant
/// certifies them, meet the targets.
bool sample_bounds_meet(const ProfileMatrix& profile, const OptimizedPlan& plan);

/// Optimizes, orders and executes one query at each target. The query is prepared
/// and profiled once. Throws std::logic_error if a plan reported feasible fails
/// sample_bounds_meet.
std::vector<QueryResult> run_query(const QueryInstance& query, std::span<const QualityTargets> targets,
                                   Variant variant, const OptimizerSettings& settings, double sample_fraction);

BenchReport run_bench(const BenchOptions& options);

/// Per-target aggregates, in order of first appearance.
std::vector<TargetSummary> summarize(std::span<const QueryResult> results);

/// Linear-interpolation percentile, q in [0,1]. Empty input gives NaN.
double percentile(std::vector<double> values, double q);

/// results.csv: query_id, variant, target_r, target_p, cost, recall, precision,
/// target_met_r, target_met_p, status. Byte-identical for identical results.
std::string results_csv(std::span<const QueryResult> results);

} // namespace semopt
