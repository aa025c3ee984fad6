#pragma once

#include "semopt/plan_ir.hpp"
#include "semopt/profile_matrix.hpp"
#include "semopt/soft_pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace semopt {

struct OptimizerSettings {
    double learning_rate = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double beta_weight = 10.0;
    int iterations = 2000;
    double tau_start = 1.0;
    double tau_end = 0.01;
    std::uint64_t seed = 0;
    /// Pick scores are projected onto [-pick_bound, pick_bound] after every step so a
    /// stage switched off early stays recoverable; 0 disables the projection.
    double pick_bound = 3.0;
    /// The step size decays linearly to zero over this final fraction of the
    /// iterations, letting the iterate settle once the temperature is low.
    double settle_fraction = 0.1;
    /// Standardized thresholds are kept within [-threshold_bound, threshold_bound].
    double threshold_bound = 6.0;
    /// Band widening per repair round, in standardized score units.
    double repair_step = 0.1;
    int repair_rounds = 30;
    /// Rounds of coordinate search on the exact sample objective after extraction;
    /// 0 disables it.
    int polish_rounds = 0;
    /// Polish only accepts moves that keep both sample bounds at least as high.
    bool polish_keep_bounds = true;
    /// Record the loss of every iteration in OptimizedPlan::loss_trace.
    bool keep_trace = false;

    void validate() const;
};

enum class PlanStatus { feasible, fallback_gold, infeasible_sample };
enum class Variant { global, local_split, independent };

const char* to_string(PlanStatus s);
const char* to_string(Variant v);
PlanStatus plan_status_from_string(const std::string& name);
Variant variant_from_string(const std::string& name);

/// One selected stage of a cascade. Thresholds are on the candidate's raw score
/// scale: accept above theta_hi, reject below theta_lo, unsure in between.
struct StageChoice {
    std::string candidate_id;
    std::string profile;
    DecisionKind decision_kind = DecisionKind::two_threshold_score;
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double cost_per_tuple = 0.0;
    bool is_gold = false;
};

/// Filters carry an ascending-cost cascade ending in the gold candidate; maps carry
/// the single selected candidate.
struct OperatorPlan {
    std::string operator_id;
    SemanticKind kind = SemanticKind::filter;
    std::vector<StageChoice> cascade;
};

/// A physical stage in execution order: (operator index, stage index).
struct ExecutionStep {
    std::size_t op = 0;
    std::size_t stage = 0;
};

struct OptimizedPlan {
    std::vector<OperatorPlan> operators;
    /// Per-tuple sample cost scaled to the pipeline's input population.
    double predicted_cost = 0.0;
    double predicted_recall_bound = 0.0;
    double predicted_precision_bound = 0.0;
    PlanStatus status = PlanStatus::feasible;
    Variant variant = Variant::global;
    bool repaired = false;
    int failed_iterations = 0;
    QualityTargets targets;
    std::vector<ExecutionStep> execution_order;
    std::vector<double> loss_trace;
};

/// The plan that runs every operator with its gold candidate only.
OptimizedPlan gold_only_plan(const ProfileMatrix& profile);

struct HardCounts {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double cost = 0.0;  // summed over sample tuples
};

/// Per-stage tuple flow of a hard replay on the sample.
struct StageFlow {
    std::size_t input = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t unsure = 0;
};

struct HardEvaluation {
    HardCounts global;
    /// Each operator against its own gold output over every sample tuple.
    std::vector<HardCounts> per_operator;
    /// flows[op][stage]; each operator replayed on the whole sample.
    std::vector<std::vector<StageFlow>> flows;
};

/// Replays a discrete plan on the profiled sample.
HardEvaluation evaluate_on_sample(const ProfileMatrix& profile, const OptimizedPlan& plan);

/// Discrete plan for a relaxed configuration: a non-gold stage is kept when its pick
/// score is strictly positive, a map keeps its highest-scoring candidate (ties to the
/// cheaper one). Thresholds are converted back to raw score units.
OptimizedPlan extract_plan(const ProfileMatrix& profile, const RelaxedConfig& config);

struct SampleBounds {
    double recall = 0.0;
    double precision = 0.0;
};

/// Hard credible bounds of `plan` on the sample under the given bound mode.
SampleBounds sample_bounds(const ProfileMatrix& profile, const OptimizedPlan& plan, const QualityTargets& targets,
                           BoundMode mode = BoundMode::global);

OptimizedPlan optimize(const ProfileMatrix& profile, const QualityTargets& targets,
                       const OptimizerSettings& settings = {});

/// Splits each target into per-operator targets T^(1/m) and optimizes every operator
/// on its own.
OptimizedPlan optimize_local_split(const ProfileMatrix& profile, const QualityTargets& targets,
                                   const OptimizerSettings& settings = {});

/// Optimizes the product of per-operator bounds, each at credible level alpha^(1/m).
OptimizedPlan optimize_independent(const ProfileMatrix& profile, const QualityTargets& targets,
                                   const OptimizerSettings& settings = {});

OptimizedPlan optimize_variant(Variant variant, const ProfileMatrix& profile, const QualityTargets& targets,
                               const OptimizerSettings& settings = {});

} // namespace semopt
