#pragma once

#include "semopt/autodiff.hpp"
#include "semopt/plan_ir.hpp"
#include "semopt/profile_matrix.hpp"

#include <span>
#include <string>
#include <vector>

namespace semopt {

/// Soft accept/reject/unsure mass of one tuple after some cascade prefix.
struct TupleState {
    double accept = 0.0;
    double reject = 0.0;
    double unsure = 1.0;
};

/// One stage's relaxed decision on one tuple; the three masses sum to 1.
struct SoftDecision {
    double accept = 0.0;
    double reject = 0.0;
    double unsure = 1.0;
};

struct SoftCounts {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double cost = 0.0;
};

/// Relaxed parameters of one physical candidate. Thresholds are expressed in the
/// candidate's standardized score units (raw = center + spread * value); the upper
/// threshold is theta_lo + softplus(gap) so the band can never invert.
struct RelaxedCandidate {
    double pick_score = 0.0;
    double theta_lo = 0.0;
    double gap = 0.0;
};

/// The optimizer's variable vector, laid out parallel to ProfileMatrix::operators
/// and their candidates.
struct RelaxedConfig {
    std::vector<std::vector<RelaxedCandidate>> operators;
    double temperature = 1.0;

    double theta_hi(std::size_t op, std::size_t cand) const;

    /// Pick scores 0 (pick factor 1/2), thresholds at the 25th/75th percentile of
    /// each candidate's standardized sample scores.
    static RelaxedConfig initial(const ProfileMatrix& profile, double temperature = 1.0);
};

/// softmax_tau([z - theta_hi, theta_lo - z, 0]).
SoftDecision soft_decision(double z, double theta_lo, double theta_hi, double tau);

struct CascadeResult {
    std::vector<TupleState> states;
    std::vector<double> cost;  // per tuple
};

/// Relaxed accept/reject/unsure recurrences over an ascending-cost cascade.
/// `pick_factors[i]` is sigma of stage i (the caller passes 1 for the gold stage),
/// `decisions[i][t]` stage i's soft decision on tuple t. A stage's cost is charged
/// on the mass still unsure before it, scaled by its pick factor.
CascadeResult propagate_cascade(std::span<const TupleState> states_in, std::span<const double> pick_factors,
                                std::span<const double> costs,
                                const std::vector<std::vector<SoftDecision>>& decisions);

/// Map operator recast as output-tuple selection: every distinct value a candidate
/// produced for tuple t is an output tuple carried by the candidates that produced it.
struct MapOutputTuple {
    std::string value;
    bool matches_gold = false;
    std::vector<std::size_t> candidates;
};

struct MapSelection {
    std::vector<std::vector<MapOutputTuple>> per_tuple;
};

MapSelection map_reduction(const std::vector<std::vector<std::string>>& candidate_outputs,
                           const std::vector<std::string>& gold_values);

/// Counts of a standalone map under soft selection weights (one per candidate).
/// Every input is gold-positive: matching mass is tp, the rest fp, and the gold
/// output's missing mass fn.
SoftCounts soft_map_counts(const MapSelection& selection, std::span<const double> weights);

/// Plan-level relaxed counts over the sample. Per-operator accept masses compose
/// multiplicatively; a tuple counts as true positive only when the gold plan keeps it
/// and every map emitted its gold value.
SoftCounts global_soft_counts(const ProfileMatrix& profile, const RelaxedConfig& config);

/// Per-operator relaxed counts, each operator judged against its own gold output
/// over the whole sample.
std::vector<SoftCounts> operator_soft_counts(const ProfileMatrix& profile, const RelaxedConfig& config);

/// Per-tuple relaxed states after each filter cascade (exposed for invariant checks).
std::vector<std::vector<TupleState>> filter_states(const ProfileMatrix& profile, const RelaxedConfig& config);

enum class BoundMode {
    /// One posterior over whole-plan counts.
    global,
    /// Product of per-operator posteriors, each at level alpha^(1/m).
    independent,
};

struct LossBreakdown {
    double cost_loss = 0.0;
    double recall_bound = 0.0;
    double precision_bound = 0.0;
    double recall_loss = 0.0;
    double precision_loss = 0.0;
    double total = 0.0;
    SoftCounts counts;
};

LossBreakdown loss_value(const ProfileMatrix& profile, const RelaxedConfig& config, const QualityTargets& targets,
                         double beta_weight, BoundMode mode = BoundMode::global);

/// Maps RelaxedConfig entries onto a flat parameter vector. Gold filter stages
/// carry no parameters; two-threshold stages carry pick, theta_lo and gap; other
/// stages only a pick score.
class ParameterLayout {
public:
    static constexpr int kNone = -1;

    struct Slots {
        int pick = kNone;
        int theta_lo = kNone;
        int gap = kNone;
    };

    explicit ParameterLayout(const ProfileMatrix& profile);

    std::size_t size() const { return size_; }
    const Slots& slots(std::size_t op, std::size_t cand) const { return slots_[op][cand]; }

    std::vector<double> pack(const RelaxedConfig& config) const;
    RelaxedConfig unpack(std::span<const double> params, double temperature) const;

private:
    std::vector<std::vector<Slots>> slots_;
    std::size_t size_ = 0;
};

struct LossGraph {
    std::vector<Var> leaves;
    Var total;
    Var cost_loss;
    Var recall_bound;
    Var precision_bound;
};

/// Records the full loss on `tape` with the parameters as leaves.
LossGraph build_loss_graph(Tape& tape, const ProfileMatrix& profile, const ParameterLayout& layout,
                           std::span<const double> params, double temperature, const QualityTargets& targets,
                           double beta_weight, BoundMode mode = BoundMode::global);

/// Soft counts and their gradients with respect to the flat parameter vector.
struct CountGradients {
    SoftCounts value;
    std::vector<double> d_tp;
    std::vector<double> d_fp;
    std::vector<double> d_fn;
    std::vector<double> d_cost;
};

struct FusedCounts {
    CountGradients global;
    /// Each operator against its own gold output (cost entries unused).
    std::vector<CountGradients> per_operator;
};

/// Evaluates the relaxed counts and differentiates them analytically, without a tape.
FusedCounts fused_soft_counts(const ProfileMatrix& profile, const ParameterLayout& layout,
                              std::span<const double> params, double tau);

/// The loss of build_loss_graph with each count recorded as one node whose partials
/// come from fused_soft_counts. Much smaller tape; same value and gradient.
LossGraph build_fused_loss_graph(Tape& tape, const ProfileMatrix& profile, const ParameterLayout& layout,
                                 std::span<const double> params, double temperature, const QualityTargets& targets,
                                 double beta_weight, BoundMode mode = BoundMode::global);

} // namespace semopt
