#include "semopt/soft_pipeline.hpp"

#include "semopt/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace semopt {

namespace {

double inverse_softplus(double y) {
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

// The relaxed pipeline is written once over a scalar type: double for plain
// evaluation, Var for recording the gradient tape.
template <class T>
struct Scalars;

template <>
struct Scalars<double> {
    double zero = 0.0;
    double one = 1.0;
    static double sub3(double x, double y, double z) { return x - y - z; }
    static double wsum(const std::vector<double>& v, const std::vector<double>& c) { return weighted_sum(v, c); }
    static double total(const std::vector<double>& v) { return sum(v); }
};

template <>
struct Scalars<Var> {
    Var zero;
    Var one;
    explicit Scalars(Tape& tape) : zero(tape.constant(0.0)), one(tape.constant(1.0)) {}
    static Var sub3(Var x, Var y, Var z) {
        const Var terms[3] = {x, y, z};
        const double coeffs[3] = {1.0, -1.0, -1.0};
        return weighted_sum(terms, coeffs);
    }
    static Var wsum(const std::vector<Var>& v, const std::vector<double>& c) { return weighted_sum(v, c); }
    static Var total(const std::vector<Var>& v) { return sum(v); }
};

template <class T>
struct StageParams {
    T sigma;     // pick factor; softmax weight for map candidates
    T theta_lo;  // two-threshold stages only
    T theta_hi;
};

template <class T>
struct FilterTupleResult {
    T accept;
    T reject;
    T unsure;
    std::optional<T> cost;  // within-operator cost, absent when zero
};

template <class T>
FilterTupleResult<T> run_filter_cascade(const OperatorProfile& op, const std::vector<StageParams<T>>& params,
                                        std::size_t t, double tau, const Scalars<T>& k) {
    T a = k.zero;
    T r = k.zero;
    T u = k.one;
    bool fresh = true;
    std::vector<T> masses;
    std::vector<double> costs;
    for (std::size_t c = 0; c < op.candidates.size(); ++c) {
        const CandidateProfile& cp = op.candidates[c];
        const double cost = cp.candidate.cost_per_tuple;
        if (cp.candidate.is_gold) {
            // always selected, resolves all remaining mass
            masses.push_back(u);
            costs.push_back(cost);
            if (op.gold_labels[t]) {
                a = fresh ? u : a + u;
            } else {
                r = fresh ? u : r + u;
            }
            u = k.zero;
            fresh = false;
            break;
        }
        const T m = fresh ? params[c].sigma : u * params[c].sigma;
        masses.push_back(m);
        costs.push_back(cost);
        if (cp.candidate.decision_kind == DecisionKind::two_threshold_score) {
            const double z = cp.standardized(t);
            const auto d = softmax3_with_temperature(z - params[c].theta_hi, params[c].theta_lo - z, k.zero, tau);
            const T ma = m * d[0];
            const T mr = m * d[1];
            a = fresh ? ma : a + ma;
            r = fresh ? mr : r + mr;
            u = Scalars<T>::sub3(u, ma, mr);
        } else {
            if (cp.scores[t] > 0.5) {
                a = fresh ? m : a + m;
            } else {
                r = fresh ? m : r + m;
            }
            u = u - m;
        }
        fresh = false;
    }
    FilterTupleResult<T> out{a, r, u, std::nullopt};
    if (!masses.empty()) {
        out.cost = Scalars<T>::wsum(masses, costs);
    }
    return out;
}

template <class T>
struct PipelineValues {
    std::vector<std::vector<T>> mass;                // filters: accept; maps: gold-match mass
    std::vector<std::vector<std::optional<T>>> cost; // within-operator cost per tuple
    std::vector<std::vector<T>> reject;              // filters only
    std::vector<std::vector<T>> unsure;              // filters only
};

template <class T>
PipelineValues<T> evaluate_operators(const ProfileMatrix& profile, const std::vector<std::vector<StageParams<T>>>& params,
                                     double tau, const Scalars<T>& k, bool keep_states) {
    const std::size_t n = profile.size();
    PipelineValues<T> out;
    out.mass.resize(profile.operators.size());
    out.cost.resize(profile.operators.size());
    out.reject.resize(profile.operators.size());
    out.unsure.resize(profile.operators.size());
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const OperatorProfile& op = profile.operators[o];
        out.mass[o].reserve(n);
        out.cost[o].reserve(n);
        if (op.kind == SemanticKind::filter) {
            for (std::size_t t = 0; t < n; ++t) {
                auto res = run_filter_cascade(op, params[o], t, tau, k);
                out.mass[o].push_back(res.accept);
                out.cost[o].push_back(res.cost);
                if (keep_states) {
                    out.reject[o].push_back(res.reject);
                    out.unsure[o].push_back(res.unsure);
                }
            }
        } else {
            std::vector<T> weights;
            std::vector<double> costs;
            for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                weights.push_back(params[o][c].sigma);
                costs.push_back(op.candidates[c].candidate.cost_per_tuple);
            }
            const T map_cost = Scalars<T>::wsum(weights, costs);
            for (std::size_t t = 0; t < n; ++t) {
                std::vector<T> matched;
                for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                    if (op.output_matches(c, t)) matched.push_back(weights[c]);
                }
                out.mass[o].push_back(matched.empty() ? k.zero : Scalars<T>::total(matched));
                out.cost[o].push_back(map_cost);
            }
        }
    }
    return out;
}

template <class T>
struct CountsT {
    T tp;
    T fp;
    T fn;
    T cost;
};

template <class T>
CountsT<T> compose_global(const ProfileMatrix& profile, const PipelineValues<T>& v, const Scalars<T>& k) {
    const std::size_t n = profile.size();
    const auto positive = profile.gold_positive();
    std::vector<T> tps, fps, fns, costs;
    tps.reserve(n);
    fps.reserve(n);
    fns.reserve(n);
    costs.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::optional<T> alive;   // product of accept masses so far; absent = 1
        std::optional<T> matched; // product of map match masses
        std::vector<T> tuple_cost;
        for (std::size_t o = 0; o < profile.operators.size(); ++o) {
            const auto& c = v.cost[o][t];
            if (c) tuple_cost.push_back(alive ? *alive * *c : *c);
            if (profile.operators[o].kind == SemanticKind::filter) {
                alive = alive ? *alive * v.mass[o][t] : v.mass[o][t];
            } else {
                matched = matched ? *matched * v.mass[o][t] : v.mass[o][t];
            }
        }
        const T accept = alive ? *alive : k.one;
        if (!tuple_cost.empty()) costs.push_back(Scalars<T>::total(tuple_cost));
        if (positive[t]) {
            const T tp = matched ? accept * *matched : accept;
            tps.push_back(tp);
            fps.push_back(accept - tp);
            fns.push_back(1.0 - tp);
        } else {
            fps.push_back(accept);
        }
    }
    const auto total_or_zero = [&](const std::vector<T>& xs) { return xs.empty() ? k.zero : Scalars<T>::total(xs); };
    return {total_or_zero(tps), total_or_zero(fps), total_or_zero(fns), total_or_zero(costs)};
}

template <class T>
std::vector<CountsT<T>> compose_per_operator(const ProfileMatrix& profile, const PipelineValues<T>& v,
                                             const Scalars<T>& k) {
    const std::size_t n = profile.size();
    std::vector<CountsT<T>> out;
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const auto& op = profile.operators[o];
        std::vector<T> tps, fps, fns;
        for (std::size_t t = 0; t < n; ++t) {
            const T& m = v.mass[o][t];
            if (op.kind == SemanticKind::map || op.gold_labels[t]) {
                tps.push_back(m);
                fns.push_back(1.0 - m);
                if (op.kind == SemanticKind::map) fps.push_back(1.0 - m);
            } else {
                fps.push_back(m);
            }
        }
        const auto total_or_zero = [&](const std::vector<T>& xs) { return xs.empty() ? k.zero : Scalars<T>::total(xs); };
        out.push_back({total_or_zero(tps), total_or_zero(fps), total_or_zero(fns), k.zero});
    }
    return out;
}

template <class T>
struct LossT {
    T total;
    T cost_loss;
    T recall_bound;
    T precision_bound;
    T recall_loss;
    T precision_loss;
    CountsT<T> counts;
};

template <class T>
LossT<T> finish_loss(const CountsT<T>& global, const std::vector<CountsT<T>>& per_op, double normalizer,
                     const QualityTargets& targets, double beta, BoundMode mode) {
    const T cost_loss = normalizer > 0.0 ? global.cost * (1.0 / normalizer) : global.cost * 0.0;
    T rb, pb;
    if (mode == BoundMode::global) {
        rb = credible_bound_node(global.tp, global.fn, targets.alpha_recall, BoundKind::recall);
        pb = credible_bound_node(global.tp, global.fp, targets.alpha_precision, BoundKind::precision);
    } else {
        const double m = static_cast<double>(per_op.size());
        const double ar = std::pow(targets.alpha_recall, 1.0 / m);
        const double ap = std::pow(targets.alpha_precision, 1.0 / m);
        std::optional<T> r, p;
        for (const auto& c : per_op) {
            const T lr = credible_bound_node(c.tp, c.fn, ar, BoundKind::recall);
            const T lp = credible_bound_node(c.tp, c.fp, ap, BoundKind::precision);
            r = r ? *r * lr : lr;
            p = p ? *p * lp : lp;
        }
        rb = *r;
        pb = *p;
    }
    const T rl = relu(targets.recall - rb);
    const T pl = relu(targets.precision - pb);
    const T total = cost_loss + beta * pl + beta * rl;
    return {total, cost_loss, rb, pb, rl, pl, global};
}

double cost_normalizer(const ProfileMatrix& profile) {
    return static_cast<double>(profile.size()) * profile.total_candidate_cost();
}

template <class T>
LossT<T> assemble_loss(const ProfileMatrix& profile, const PipelineValues<T>& v, const QualityTargets& targets,
                       double beta, BoundMode mode, const Scalars<T>& k) {
    const CountsT<T> global = compose_global(profile, v, k);
    std::vector<CountsT<T>> per_op;
    if (mode == BoundMode::independent) per_op = compose_per_operator(profile, v, k);
    return finish_loss(global, per_op, cost_normalizer(profile), targets, beta, mode);
}

std::vector<std::vector<StageParams<double>>> stage_params(const ProfileMatrix& profile, const RelaxedConfig& config) {
    if (config.operators.size() != profile.operators.size()) {
        throw InvalidInput("relaxed config does not match the profile's operators");
    }
    const double tau = config.temperature;
    std::vector<std::vector<StageParams<double>>> out(profile.operators.size());
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const auto& op = profile.operators[o];
        if (config.operators[o].size() != op.candidates.size()) {
            throw InvalidInput("relaxed config does not match the candidates of '" + op.operator_id + "'");
        }
        if (op.kind == SemanticKind::map) {
            std::vector<double> logits;
            for (const auto& rc : config.operators[o]) logits.push_back(rc.pick_score);
            const auto w = softmax_with_temperature(std::span<const double>(logits), tau);
            for (double x : w) out[o].push_back({x, 0.0, 0.0});
            continue;
        }
        for (std::size_t c = 0; c < op.candidates.size(); ++c) {
            const auto& rc = config.operators[o][c];
            const double sigma =
                op.candidates[c].candidate.is_gold ? 1.0 : sigmoid_with_temperature(rc.pick_score, tau);
            out[o].push_back({sigma, rc.theta_lo, config.theta_hi(o, c)});
        }
    }
    return out;
}

SoftCounts to_soft_counts(const CountsT<double>& c) { return {c.tp, c.fp, c.fn, c.cost}; }

// Fused evaluation -------------------------------------------------------------
//
// Soft counts and their exact gradients from a hand-written reverse pass over the
// cascade recurrences. Inside a filter cascade u_{c+1} = u_c * rho_c with
// rho_c = 1 - sigma_c * (pi_a + pi_r), and both the accept mass and the operator
// cost have the form X = sum_c u_c * g_c + u_K * G, so the tail sums
// T_c = g_c + rho_c * T_{c+1} (T_K = G) give dX/dg_c = u_c and dX/drho_c = u_c * T_{c+1}.

struct FusedStage {
    int pick = ParameterLayout::kNone;
    int lo = ParameterLayout::kNone;
    int gap = ParameterLayout::kNone;
    bool two_threshold = false;
    double sigma = 1.0;
    double dsigma = 0.0;    // d sigma / d pick
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double dhi_dgap = 0.0;  // sigmoid(gap)
    double cost = 0.0;
};

struct StageState {
    double u = 1.0;
    double pa = 0.0;
    double pr = 0.0;
    double tail_a = 0.0;  // T_{c+1} for the accept mass
    double tail_c = 0.0;  // T_{c+1} for the cost
};

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Local gradient of an operator output with respect to the operator's leaves, as
/// (slot, value) accumulations into `grad` scaled by `seed`.
void scatter_filter(const std::vector<FusedStage>& stages, const std::vector<StageState>& st, double tau,
                    double seed_a, double seed_c, std::vector<double>& grad) {
    if (seed_a == 0.0 && seed_c == 0.0) return;
    for (std::size_t c = 0; c < stages.size(); ++c) {
        const FusedStage& sg = stages[c];
        const StageState& s = st[c];
        const double resolve = s.pa + s.pr;
        // d/d sigma
        const double d_sigma = seed_a * s.u * (s.pa - s.tail_a * resolve) + seed_c * s.u * (sg.cost - s.tail_c * resolve);
        if (sg.pick != ParameterLayout::kNone) grad[sg.pick] += d_sigma * sg.dsigma;
        if (!sg.two_threshold) continue;
        // d/d pi_a and d/d pi_r
        const double d_pa = seed_a * s.u * sg.sigma * (1.0 - s.tail_a) - seed_c * s.u * sg.sigma * s.tail_c;
        const double d_pr = -seed_a * s.u * sg.sigma * s.tail_a - seed_c * s.u * sg.sigma * s.tail_c;
        const double inner = d_pa * s.pa + d_pr * s.pr;
        const double dl1 = s.pa * (d_pa - inner);  // logit (z - hi) / tau
        const double dl2 = s.pr * (d_pr - inner);  // logit (lo - z) / tau
        grad[sg.lo] += (dl2 - dl1) / tau;
        grad[sg.gap] += -dl1 / tau * sg.dhi_dgap;
    }
}

} // namespace

double RelaxedConfig::theta_hi(std::size_t op, std::size_t cand) const {
    const auto& rc = operators[op][cand];
    return rc.theta_lo + softplus(rc.gap);
}

RelaxedConfig RelaxedConfig::initial(const ProfileMatrix& profile, double temperature) {
    RelaxedConfig config;
    config.temperature = temperature;
    for (const auto& op : profile.operators) {
        std::vector<RelaxedCandidate> cands;
        for (const auto& cp : op.candidates) {
            RelaxedCandidate rc;
            if (op.kind == SemanticKind::filter && cp.candidate.decision_kind == DecisionKind::two_threshold_score &&
                !cp.candidate.is_gold) {
                std::vector<double> z;
                z.reserve(cp.scores.size());
                for (std::size_t t = 0; t < cp.scores.size(); ++t) z.push_back(cp.standardized(t));
                const double lo = percentile(z, 0.25);
                const double hi = percentile(z, 0.75);
                rc.theta_lo = lo;
                rc.gap = inverse_softplus(std::max(hi - lo, 1e-3));
            }
            cands.push_back(rc);
        }
        config.operators.push_back(std::move(cands));
    }
    return config;
}

SoftDecision soft_decision(double z, double theta_lo, double theta_hi, double tau) {
    const auto p = softmax3_with_temperature(z - theta_hi, theta_lo - z, 0.0, tau);
    return {p[0], p[1], p[2]};
}

CascadeResult propagate_cascade(std::span<const TupleState> states_in, std::span<const double> pick_factors,
                                std::span<const double> costs,
                                const std::vector<std::vector<SoftDecision>>& decisions) {
    if (pick_factors.size() != costs.size() || decisions.size() != costs.size()) {
        throw InvalidInput("cascade stage arrays disagree in length");
    }
    CascadeResult out;
    out.states.assign(states_in.begin(), states_in.end());
    out.cost.assign(states_in.size(), 0.0);
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (decisions[i].size() != states_in.size()) {
            throw InvalidInput("cascade decisions do not cover every tuple");
        }
        for (std::size_t t = 0; t < states_in.size(); ++t) {
            TupleState& s = out.states[t];
            const double m = s.unsure * pick_factors[i];
            out.cost[t] += m * costs[i];
            s.accept += m * decisions[i][t].accept;
            s.reject += m * decisions[i][t].reject;
            s.unsure = 1.0 - s.accept - s.reject;
        }
    }
    return out;
}

MapSelection map_reduction(const std::vector<std::vector<std::string>>& candidate_outputs,
                           const std::vector<std::string>& gold_values) {
    MapSelection sel;
    sel.per_tuple.resize(gold_values.size());
    for (std::size_t c = 0; c < candidate_outputs.size(); ++c) {
        if (candidate_outputs[c].size() != gold_values.size()) {
            throw InvalidInput("map outputs do not cover every tuple");
        }
    }
    for (std::size_t t = 0; t < gold_values.size(); ++t) {
        auto& outs = sel.per_tuple[t];
        for (std::size_t c = 0; c < candidate_outputs.size(); ++c) {
            const std::string& v = candidate_outputs[c][t];
            auto it = std::find_if(outs.begin(), outs.end(), [&](const auto& o) { return values_equal(o.value, v); });
            if (it == outs.end()) {
                outs.push_back({v, values_equal(v, gold_values[t]), {c}});
            } else {
                it->candidates.push_back(c);
            }
        }
    }
    return sel;
}

SoftCounts soft_map_counts(const MapSelection& selection, std::span<const double> weights) {
    SoftCounts counts;
    for (const auto& outs : selection.per_tuple) {
        double matched = 0.0;
        for (const auto& o : outs) {
            double mass = 0.0;
            for (std::size_t c : o.candidates) mass += weights[c];
            if (o.matches_gold) {
                matched += mass;
            } else {
                counts.fp += mass;
            }
        }
        counts.tp += matched;
        counts.fn += std::max(0.0, 1.0 - matched);
    }
    return counts;
}

SoftCounts global_soft_counts(const ProfileMatrix& profile, const RelaxedConfig& config) {
    Scalars<double> k;
    const auto v = evaluate_operators(profile, stage_params(profile, config), config.temperature, k, false);
    return to_soft_counts(compose_global(profile, v, k));
}

std::vector<SoftCounts> operator_soft_counts(const ProfileMatrix& profile, const RelaxedConfig& config) {
    Scalars<double> k;
    const auto v = evaluate_operators(profile, stage_params(profile, config), config.temperature, k, false);
    std::vector<SoftCounts> out;
    for (const auto& c : compose_per_operator(profile, v, k)) out.push_back(to_soft_counts(c));
    return out;
}

std::vector<std::vector<TupleState>> filter_states(const ProfileMatrix& profile, const RelaxedConfig& config) {
    Scalars<double> k;
    const auto v = evaluate_operators(profile, stage_params(profile, config), config.temperature, k, true);
    std::vector<std::vector<TupleState>> out(profile.operators.size());
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        if (profile.operators[o].kind != SemanticKind::filter) continue;
        for (std::size_t t = 0; t < profile.size(); ++t) {
            out[o].push_back({v.mass[o][t], v.reject[o][t], v.unsure[o][t]});
        }
    }
    return out;
}

LossBreakdown loss_value(const ProfileMatrix& profile, const RelaxedConfig& config, const QualityTargets& targets,
                         double beta_weight, BoundMode mode) {
    Scalars<double> k;
    const auto v = evaluate_operators(profile, stage_params(profile, config), config.temperature, k, false);
    const auto l = assemble_loss(profile, v, targets, beta_weight, mode, k);
    LossBreakdown out;
    out.cost_loss = l.cost_loss;
    out.recall_bound = l.recall_bound;
    out.precision_bound = l.precision_bound;
    out.recall_loss = l.recall_loss;
    out.precision_loss = l.precision_loss;
    out.total = l.total;
    out.counts = to_soft_counts(l.counts);
    return out;
}

ParameterLayout::ParameterLayout(const ProfileMatrix& profile) {
    int next = 0;
    for (const auto& op : profile.operators) {
        std::vector<Slots> slots;
        for (const auto& cp : op.candidates) {
            Slots s;
            if (op.kind == SemanticKind::map) {
                s.pick = next++;
            } else if (!cp.candidate.is_gold) {
                s.pick = next++;
                if (cp.candidate.decision_kind == DecisionKind::two_threshold_score) {
                    s.theta_lo = next++;
                    s.gap = next++;
                }
            }
            slots.push_back(s);
        }
        slots_.push_back(std::move(slots));
    }
    size_ = static_cast<std::size_t>(next);
}

std::vector<double> ParameterLayout::pack(const RelaxedConfig& config) const {
    std::vector<double> params(size_, 0.0);
    for (std::size_t o = 0; o < slots_.size(); ++o) {
        for (std::size_t c = 0; c < slots_[o].size(); ++c) {
            const auto& s = slots_[o][c];
            const auto& rc = config.operators.at(o).at(c);
            if (s.pick != kNone) params[s.pick] = rc.pick_score;
            if (s.theta_lo != kNone) params[s.theta_lo] = rc.theta_lo;
            if (s.gap != kNone) params[s.gap] = rc.gap;
        }
    }
    return params;
}

RelaxedConfig ParameterLayout::unpack(std::span<const double> params, double temperature) const {
    RelaxedConfig config;
    config.temperature = temperature;
    for (const auto& op_slots : slots_) {
        std::vector<RelaxedCandidate> cands;
        for (const auto& s : op_slots) {
            RelaxedCandidate rc;
            if (s.pick != kNone) rc.pick_score = params[s.pick];
            if (s.theta_lo != kNone) rc.theta_lo = params[s.theta_lo];
            if (s.gap != kNone) rc.gap = params[s.gap];
            cands.push_back(rc);
        }
        config.operators.push_back(std::move(cands));
    }
    return config;
}

LossGraph build_loss_graph(Tape& tape, const ProfileMatrix& profile, const ParameterLayout& layout,
                           std::span<const double> params, double temperature, const QualityTargets& targets,
                           double beta_weight, BoundMode mode) {
    if (params.size() != layout.size()) {
        throw InvalidInput("parameter vector does not match the layout");
    }
    LossGraph graph;
    graph.leaves.reserve(params.size());
    for (double p : params) graph.leaves.push_back(tape.variable(p));

    Scalars<Var> k(tape);
    std::vector<std::vector<StageParams<Var>>> stage(profile.operators.size());
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const auto& op = profile.operators[o];
        if (op.kind == SemanticKind::map) {
            std::vector<Var> logits;
            for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                logits.push_back(graph.leaves[layout.slots(o, c).pick]);
            }
            for (Var w : softmax_with_temperature(logits, temperature)) stage[o].push_back({w, k.zero, k.zero});
            continue;
        }
        for (std::size_t c = 0; c < op.candidates.size(); ++c) {
            const auto& s = layout.slots(o, c);
            StageParams<Var> sp{k.one, k.zero, k.zero};
            if (s.pick != ParameterLayout::kNone) {
                sp.sigma = sigmoid_with_temperature(graph.leaves[s.pick], temperature);
            }
            if (s.theta_lo != ParameterLayout::kNone) {
                sp.theta_lo = graph.leaves[s.theta_lo];
                sp.theta_hi = sp.theta_lo + softplus(graph.leaves[s.gap]);
            }
            stage[o].push_back(sp);
        }
    }
    const auto v = evaluate_operators(profile, stage, temperature, k, false);
    const auto l = assemble_loss(profile, v, targets, beta_weight, mode, k);
    graph.total = l.total;
    graph.cost_loss = l.cost_loss;
    graph.recall_bound = l.recall_bound;
    graph.precision_bound = l.precision_bound;
    return graph;
}

FusedCounts fused_soft_counts(const ProfileMatrix& profile, const ParameterLayout& layout,
                              std::span<const double> params, double tau) {
    if (params.size() != layout.size()) throw InvalidInput("parameter vector does not match the layout");
    if (!(tau > 0.0)) throw InvalidInput("temperature must be positive");
    const std::size_t n = profile.size();
    const std::size_t m = profile.operators.size();
    const std::size_t p = layout.size();

    FusedCounts out;
    const auto init = [p](CountGradients& g) {
        g.d_tp.assign(p, 0.0);
        g.d_fp.assign(p, 0.0);
        g.d_fn.assign(p, 0.0);
        g.d_cost.assign(p, 0.0);
    };
    init(out.global);
    out.per_operator.resize(m);
    for (auto& g : out.per_operator) init(g);

    // Parameter-only quantities.
    std::vector<std::vector<FusedStage>> stages(m);
    std::vector<double> gold_cost(m, 0.0);
    std::vector<std::vector<double>> map_w(m);
    std::vector<double> map_cost(m, 0.0);
    for (std::size_t o = 0; o < m; ++o) {
        const OperatorProfile& op = profile.operators[o];
        if (op.kind == SemanticKind::map) {
            std::vector<double> logits;
            for (std::size_t c = 0; c < op.candidates.size(); ++c) logits.push_back(params[layout.slots(o, c).pick]);
            map_w[o] = softmax_with_temperature(std::span<const double>(logits), tau);
            for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                map_cost[o] += map_w[o][c] * op.candidates[c].candidate.cost_per_tuple;
            }
            continue;
        }
        for (std::size_t c = 0; c < op.candidates.size(); ++c) {
            const CandidateProfile& cp = op.candidates[c];
            if (cp.candidate.is_gold) {
                gold_cost[o] = cp.candidate.cost_per_tuple;
                continue;
            }
            const auto& sl = layout.slots(o, c);
            FusedStage sg;
            sg.pick = sl.pick;
            sg.lo = sl.theta_lo;
            sg.gap = sl.gap;
            sg.cost = cp.candidate.cost_per_tuple;
            sg.sigma = stable_sigmoid(params[sl.pick] / tau);
            sg.dsigma = sg.sigma * (1.0 - sg.sigma) / tau;
            sg.two_threshold = cp.candidate.decision_kind == DecisionKind::two_threshold_score;
            if (sg.two_threshold) {
                sg.theta_lo = params[sl.theta_lo];
                sg.theta_hi = sg.theta_lo + softplus(params[sl.gap]);
                sg.dhi_dgap = stable_sigmoid(params[sl.gap]);
            }
            stages[o].push_back(sg);
        }
    }

    const auto positive = profile.gold_positive();
    std::vector<std::vector<StageState>> st(m);
    std::vector<double> mass(m), cost(m), alive(m + 1), after(m + 1), tail_cost(m + 1);
    std::vector<double> local_a(p), local_c(p);
    std::vector<double> map_alive_weight(m, 0.0);  // sum over tuples of d cost / d map cost

    for (std::size_t t = 0; t < n; ++t) {
        // Forward through every operator.
        for (std::size_t o = 0; o < m; ++o) {
            const OperatorProfile& op = profile.operators[o];
            if (op.kind == SemanticKind::map) {
                double match = 0.0;
                for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                    if (op.output_matches(c, t)) match += map_w[o][c];
                }
                mass[o] = match;
                cost[o] = map_cost[o];
                continue;
            }
            auto& ss = st[o];
            ss.assign(stages[o].size(), StageState{});
            double u = 1.0;
            for (std::size_t c = 0; c < stages[o].size(); ++c) {
                const FusedStage& sg = stages[o][c];
                const std::size_t cand = c;  // non-gold candidates precede gold
                ss[c].u = u;
                if (sg.two_threshold) {
                    const double z = op.candidates[cand].standardized(t);
                    const auto pi = softmax3_with_temperature(z - sg.theta_hi, sg.theta_lo - z, 0.0, tau);
                    ss[c].pa = pi[0];
                    ss[c].pr = pi[1];
                } else {
                    const bool acc = op.candidates[cand].scores[t] > 0.5;
                    ss[c].pa = acc ? 1.0 : 0.0;
                    ss[c].pr = acc ? 0.0 : 1.0;
                }
                u *= 1.0 - sg.sigma * (ss[c].pa + ss[c].pr);
            }
            // Tails, from the gold stage backwards.
            double ta = op.gold_labels[t] ? 1.0 : 0.0;
            double tc = gold_cost[o];
            for (std::size_t c = stages[o].size(); c-- > 0;) {
                const FusedStage& sg = stages[o][c];
                ss[c].tail_a = ta;
                ss[c].tail_c = tc;
                const double rho = 1.0 - sg.sigma * (ss[c].pa + ss[c].pr);
                ta = sg.sigma * ss[c].pa + rho * ta;
                tc = sg.sigma * sg.cost + rho * tc;
            }
            mass[o] = ta;
            cost[o] = tc;
        }

        // Plan-level composition.
        alive[0] = 1.0;
        double match = 1.0;
        for (std::size_t o = 0; o < m; ++o) {
            const bool filter = profile.operators[o].kind == SemanticKind::filter;
            alive[o + 1] = filter ? alive[o] * mass[o] : alive[o];
            if (!filter) match *= mass[o];
        }
        after[m] = 1.0;      // product of filter masses after o
        tail_cost[m] = 0.0;  // d cost / d alive
        for (std::size_t o = m; o-- > 0;) {
            const bool filter = profile.operators[o].kind == SemanticKind::filter;
            after[o] = filter ? after[o + 1] * mass[o] : after[o + 1];
            tail_cost[o] = cost[o] + (filter ? mass[o] : 1.0) * tail_cost[o + 1];
        }
        const double accept = alive[m];
        const double y = positive[t] ? 1.0 : 0.0;
        const double tp = y * accept * match;
        out.global.value.tp += tp;
        out.global.value.fp += accept - tp;
        out.global.value.fn += y - tp;
        out.global.value.cost += tail_cost[0];

        for (std::size_t o = 0; o < m; ++o) {
            const OperatorProfile& op = profile.operators[o];
            CountGradients& og = out.per_operator[o];
            if (op.kind == SemanticKind::map) {
                double match_others = 1.0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j != o && profile.operators[j].kind == SemanticKind::map) match_others *= mass[j];
                }
                const double d_tp = y * accept * match_others;
                map_alive_weight[o] += alive[o];
                og.value.tp += mass[o];
                og.value.fp += 1.0 - mass[o];
                og.value.fn += 1.0 - mass[o];
                for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                    const double w = map_w[o][c];
                    const double dm = w * ((op.output_matches(c, t) ? 1.0 : 0.0) - mass[o]) / tau;
                    const int slot = layout.slots(o, c).pick;
                    out.global.d_tp[slot] += d_tp * dm;
                    out.global.d_fp[slot] -= d_tp * dm;
                    out.global.d_fn[slot] -= d_tp * dm;
                    og.d_tp[slot] += dm;
                    og.d_fp[slot] -= dm;
                    og.d_fn[slot] -= dm;
                }
                continue;
            }
            const double d_accept = alive[o] * after[o + 1];
            const double d_tp = y * match * d_accept;
            const double d_cost_mass = alive[o] * tail_cost[o + 1];
            const double d_cost_cost = alive[o];
            const double label = op.gold_labels[t] ? 1.0 : 0.0;
            og.value.tp += label * mass[o];
            og.value.fp += (1.0 - label) * mass[o];
            og.value.fn += label * (1.0 - mass[o]);

            std::fill(local_a.begin(), local_a.end(), 0.0);
            std::fill(local_c.begin(), local_c.end(), 0.0);
            scatter_filter(stages[o], st[o], tau, 1.0, 0.0, local_a);
            scatter_filter(stages[o], st[o], tau, 0.0, 1.0, local_c);
            for (const auto& sg : stages[o]) {
                for (int slot : {sg.pick, sg.lo, sg.gap}) {
                    if (slot == ParameterLayout::kNone) continue;
                    const double ga = local_a[slot];
                    const double gc = local_c[slot];
                    out.global.d_tp[slot] += d_tp * ga;
                    out.global.d_fp[slot] += (d_accept - d_tp) * ga;
                    out.global.d_fn[slot] -= d_tp * ga;
                    out.global.d_cost[slot] += d_cost_mass * ga + d_cost_cost * gc;
                    og.d_tp[slot] += label * ga;
                    og.d_fp[slot] += (1.0 - label) * ga;
                    og.d_fn[slot] -= label * ga;
                }
            }
        }
    }

    // Map costs do not depend on the tuple; scatter them once.
    for (std::size_t o = 0; o < m; ++o) {
        const OperatorProfile& op = profile.operators[o];
        if (op.kind != SemanticKind::map) continue;
        for (std::size_t c = 0; c < op.candidates.size(); ++c) {
            const double w = map_w[o][c];
            const double dc = w * (op.candidates[c].candidate.cost_per_tuple - map_cost[o]) / tau;
            out.global.d_cost[layout.slots(o, c).pick] += map_alive_weight[o] * dc;
        }
    }
    return out;
}

LossGraph build_fused_loss_graph(Tape& tape, const ProfileMatrix& profile, const ParameterLayout& layout,
                                 std::span<const double> params, double temperature, const QualityTargets& targets,
                                 double beta_weight, BoundMode mode) {
    const FusedCounts fc = fused_soft_counts(profile, layout, params, temperature);
    LossGraph graph;
    graph.leaves.reserve(params.size());
    for (double x : params) graph.leaves.push_back(tape.variable(x));

    std::vector<Tape::Edge> edges;
    const auto node = [&](double value, const std::vector<double>& grad) {
        edges.clear();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (grad[i] != 0.0) edges.push_back({graph.leaves[i].index(), grad[i]});
        }
        return tape.push(value, std::span<const Tape::Edge>(edges));
    };
    const auto counts = [&](const CountGradients& g) {
        return CountsT<Var>{node(g.value.tp, g.d_tp), node(g.value.fp, g.d_fp), node(g.value.fn, g.d_fn),
                            node(g.value.cost, g.d_cost)};
    };
    const CountsT<Var> global = counts(fc.global);
    std::vector<CountsT<Var>> per_op;
    if (mode == BoundMode::independent) {
        for (const auto& g : fc.per_operator) per_op.push_back(counts(g));
    }
    const auto l = finish_loss(global, per_op, cost_normalizer(profile), targets, beta_weight, mode);
    graph.total = l.total;
    graph.cost_loss = l.cost_loss;
    graph.recall_bound = l.recall_bound;
    graph.precision_bound = l.precision_bound;
    return graph;
}

} // namespace semopt
