#include "semopt/optimizer.hpp"

#include "semopt/error.hpp"
#include "semopt/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace semopt {

namespace {

enum class Outcome { accept, reject, unsure };

SampleBounds bounds_of(const HardEvaluation& ev, const QualityTargets& targets, BoundMode mode);

std::size_t candidate_index(const OperatorProfile& op, const std::string& id) {
    for (std::size_t c = 0; c < op.candidates.size(); ++c) {
        if (op.candidates[c].candidate.id == id) return c;
    }
    throw InvalidInput("candidate '" + id + "' is not profiled for operator '" + op.operator_id + "'");
}

const OperatorProfile& profile_for(const ProfileMatrix& profile, const OperatorPlan& op_plan, std::size_t o) {
    const OperatorProfile& op = profile.operators.at(o);
    if (op.operator_id != op_plan.operator_id) {
        throw InvalidInput("plan operator '" + op_plan.operator_id + "' does not match profile operator '" +
                           op.operator_id + "'");
    }
    return op;
}

Outcome stage_outcome(const StageChoice& stage, const CandidateProfile& cp, const OperatorProfile& op,
                      std::size_t t) {
    if (stage.is_gold) return op.gold_labels[t] ? Outcome::accept : Outcome::reject;
    const double s = cp.scores[t];
    if (stage.decision_kind == DecisionKind::direct_value) return s > 0.5 ? Outcome::accept : Outcome::reject;
    if (s > stage.theta_hi) return Outcome::accept;
    if (s < stage.theta_lo) return Outcome::reject;
    return Outcome::unsure;
}

StageChoice make_stage(const CandidateProfile& cp) {
    StageChoice s;
    s.candidate_id = cp.candidate.id;
    s.profile = cp.candidate.profile;
    s.decision_kind = cp.candidate.decision_kind;
    s.cost_per_tuple = cp.candidate.cost_per_tuple;
    s.is_gold = cp.candidate.is_gold;
    s.theta_lo = 0.5;
    s.theta_hi = 0.5;
    return s;
}

double population_of(const ProfileMatrix& profile) {
    return profile.population_size > 0 ? static_cast<double>(profile.population_size)
                                       : static_cast<double>(profile.size());
}

bool meets(const SampleBounds& b, const QualityTargets& targets) {
    return b.recall >= targets.recall && b.precision >= targets.precision;
}

double sample_cost(const ProfileMatrix& profile, const OptimizedPlan& plan) {
    return evaluate_on_sample(profile, plan).global.cost;
}

/// Drops non-gold stages that see no sample tuple or decide none of them. Neither
/// changes any sample outcome.
void prune_idle_stages(const ProfileMatrix& profile, OptimizedPlan& plan) {
    const HardEvaluation ev = evaluate_on_sample(profile, plan);
    for (std::size_t o = 0; o < plan.operators.size(); ++o) {
        auto& cascade = plan.operators[o].cascade;
        if (plan.operators[o].kind != SemanticKind::filter) continue;
        std::vector<StageChoice> kept;
        for (std::size_t i = 0; i < cascade.size(); ++i) {
            const StageFlow& f = ev.flows[o][i];
            const bool idle = f.input == 0 || f.unsure == f.input;
            if (cascade[i].is_gold || !idle) kept.push_back(cascade[i]);
        }
        cascade = std::move(kept);
    }
}

void fill_prediction(const ProfileMatrix& profile, OptimizedPlan& plan, const QualityTargets& targets,
                     BoundMode mode) {
    const HardEvaluation ev = evaluate_on_sample(profile, plan);
    const SampleBounds b = sample_bounds(profile, plan, targets, mode);
    plan.predicted_recall_bound = b.recall;
    plan.predicted_precision_bound = b.precision;
    plan.predicted_cost = profile.size() > 0 ? ev.global.cost / static_cast<double>(profile.size()) *
                                                    population_of(profile)
                                              : 0.0;
    plan.targets = targets;
}

/// Which band edges a repair round moves: the reject edge guards recall, the accept
/// edge precision.
enum class Widen { both, reject_edge, accept_edge };

OptimizedPlan widened(const ProfileMatrix& profile, const OptimizedPlan& base, double delta, bool drop_direct,
                      bool gold_maps, Widen edges) {
    OptimizedPlan plan = base;
    for (std::size_t o = 0; o < plan.operators.size(); ++o) {
        const OperatorProfile& op = profile.operators[o];
        auto& cascade = plan.operators[o].cascade;
        if (op.kind == SemanticKind::map) {
            if (gold_maps) cascade = {make_stage(op.gold())};
            continue;
        }
        std::vector<StageChoice> kept;
        for (auto stage : cascade) {
            if (!stage.is_gold && stage.decision_kind == DecisionKind::direct_value && drop_direct) continue;
            if (!stage.is_gold && stage.decision_kind == DecisionKind::two_threshold_score) {
                const double spread = op.candidates[candidate_index(op, stage.candidate_id)].score_spread;
                if (edges != Widen::accept_edge) stage.theta_lo -= delta * spread;
                if (edges != Widen::reject_edge) stage.theta_hi += delta * spread;
            }
            kept.push_back(stage);
        }
        cascade = std::move(kept);
    }
    return plan;
}

/// Widens unsure bands (and optionally drops hard-deciding stages or reverts maps to
/// gold) until the sample bounds meet the targets; returns the cheapest success.
std::optional<OptimizedPlan> repair(const ProfileMatrix& profile, const OptimizedPlan& base,
                                    const QualityTargets& targets, BoundMode mode,
                                    const OptimizerSettings& settings) {
    std::optional<OptimizedPlan> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int gold_maps = 0; gold_maps < 2; ++gold_maps) {
        for (int drop_direct = 0; drop_direct < 2; ++drop_direct) {
            for (Widen edges : {Widen::both, Widen::reject_edge, Widen::accept_edge}) {
                for (int k = 0; k <= settings.repair_rounds; ++k) {
                    OptimizedPlan p = widened(profile, base, settings.repair_step * k, drop_direct != 0,
                                              gold_maps != 0, edges);
                    if (!meets(sample_bounds(profile, p, targets, mode), targets)) continue;
                    prune_idle_stages(profile, p);
                    const double c = sample_cost(profile, p);
                    if (c < best_cost) {
                        best_cost = c;
                        best = std::move(p);
                    }
                    break;
                }
            }
        }
    }
    return best;
}

/// Threshold values worth trying for a candidate: midpoints between consecutive
/// distinct sample scores, thinned to at most `limit`, plus one value past each end.
std::vector<double> threshold_grid(const CandidateProfile& cp, std::size_t limit) {
    std::vector<double> s = cp.scores;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::vector<double> mids;
    if (s.empty()) return mids;
    mids.push_back(s.front() - 1.0);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) mids.push_back(0.5 * (s[i] + s[i + 1]));
    mids.push_back(s.back() + 1.0);
    if (mids.size() <= limit) return mids;
    std::vector<double> thin;
    for (std::size_t k = 0; k < limit; ++k) {
        thin.push_back(mids[k * (mids.size() - 1) / (limit - 1)]);
    }
    return thin;
}

/// Coordinate search on the exact sample objective: each round applies the single
/// move (one threshold to a grid value, a map to another candidate, or dropping a
/// stage) that lowers the sample cost most while the bounds stay met.
void polish(const ProfileMatrix& profile, OptimizedPlan& plan, const QualityTargets& targets, BoundMode mode,
            int rounds, bool keep_bounds) {
    constexpr std::size_t kGrid = 64;
    SampleBounds floor{targets.recall, targets.precision};
    const auto feasible_cost = [&](const OptimizedPlan& p) {
        const HardEvaluation ev = evaluate_on_sample(profile, p);
        const SampleBounds b = bounds_of(ev, targets, mode);
        return b.recall >= floor.recall && b.precision >= floor.precision ? ev.global.cost
                                                                          : std::numeric_limits<double>::infinity();
    };
    double best_cost = feasible_cost(plan);
    if (!std::isfinite(best_cost)) return;
    if (keep_bounds) floor = sample_bounds(profile, plan, targets, mode);

    std::vector<std::vector<std::vector<double>>> grids(plan.operators.size());
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const OperatorProfile& op = profile.operators[o];
        grids[o].resize(op.candidates.size());
        if (op.kind != SemanticKind::filter) continue;
        for (std::size_t c = 0; c < op.candidates.size(); ++c) {
            if (op.candidates[c].candidate.decision_kind == DecisionKind::two_threshold_score) {
                grids[o][c] = threshold_grid(op.candidates[c], kGrid);
            }
        }
    }

    for (int round = 0; round < rounds; ++round) {
        std::optional<OptimizedPlan> best_move;
        const auto consider = [&](OptimizedPlan&& p) {
            const double c = feasible_cost(p);
            if (c < best_cost - 1e-12) {
                best_cost = c;
                best_move = std::move(p);
            }
        };
        for (std::size_t o = 0; o < plan.operators.size(); ++o) {
            const OperatorProfile& op = profile.operators[o];
            const auto& cascade = plan.operators[o].cascade;
            if (op.kind == SemanticKind::map) {
                for (const auto& cp : op.candidates) {
                    if (cp.candidate.id == cascade.front().candidate_id) continue;
                    OptimizedPlan p = plan;
                    p.operators[o].cascade = {make_stage(cp)};
                    consider(std::move(p));
                }
                continue;
            }
            // Insert a missing candidate at its cost position with one active threshold.
            for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                const CandidateProfile& cp = op.candidates[c];
                const auto& grid = grids[o][c];
                if (cp.candidate.is_gold || grid.empty()) continue;
                const bool present = std::any_of(cascade.begin(), cascade.end(), [&](const StageChoice& s) {
                    return s.candidate_id == cp.candidate.id;
                });
                if (present) continue;
                std::size_t at = 0;
                while (at < cascade.size() && !cascade[at].is_gold &&
                       cascade[at].cost_per_tuple <= cp.candidate.cost_per_tuple) {
                    ++at;
                }
                for (double v : grid) {
                    for (int side = 0; side < 2; ++side) {
                        StageChoice stage = make_stage(cp);
                        stage.theta_lo = side == 0 ? grid.front() : v;
                        stage.theta_hi = side == 0 ? v : grid.back();
                        OptimizedPlan p = plan;
                        p.operators[o].cascade.insert(p.operators[o].cascade.begin() + static_cast<std::ptrdiff_t>(at),
                                                      stage);
                        consider(std::move(p));
                    }
                }
            }
            for (std::size_t i = 0; i < cascade.size(); ++i) {
                const StageChoice& stage = cascade[i];
                if (stage.is_gold) continue;
                {
                    OptimizedPlan p = plan;
                    p.operators[o].cascade.erase(p.operators[o].cascade.begin() + static_cast<std::ptrdiff_t>(i));
                    consider(std::move(p));
                }
                if (stage.decision_kind != DecisionKind::two_threshold_score) continue;
                for (double v : grids[o][candidate_index(op, stage.candidate_id)]) {
                    if (v >= stage.theta_lo && v != stage.theta_hi) {
                        OptimizedPlan p = plan;
                        p.operators[o].cascade[i].theta_hi = v;
                        consider(std::move(p));
                    }
                    if (v <= stage.theta_hi && v != stage.theta_lo) {
                        OptimizedPlan p = plan;
                        p.operators[o].cascade[i].theta_lo = v;
                        consider(std::move(p));
                    }
                }
            }
        }
        if (!best_move) break;
        plan = std::move(*best_move);
    }
    prune_idle_stages(profile, plan);
}

struct DescentResult {
    RelaxedConfig config;
    std::vector<double> trace;
    int failed = 0;
};

DescentResult descend(const ProfileMatrix& profile, const QualityTargets& targets,
                      const OptimizerSettings& settings, BoundMode mode) {
    const ParameterLayout layout(profile);
    std::vector<double> params = layout.pack(RelaxedConfig::initial(profile, settings.tau_start));
    std::vector<double> m1(params.size(), 0.0);
    std::vector<double> m2(params.size(), 0.0);
    DescentResult out;
    if (settings.keep_trace) out.trace.reserve(static_cast<std::size_t>(settings.iterations));
    Tape tape;
    double b1t = 1.0;
    double b2t = 1.0;
    // Index sets for the projection step.
    std::vector<std::size_t> picks;
    std::vector<std::size_t> lows;
    std::vector<std::size_t> gaps;
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        for (std::size_t c = 0; c < profile.operators[o].candidates.size(); ++c) {
            const auto& sl = layout.slots(o, c);
            if (sl.pick != ParameterLayout::kNone) picks.push_back(static_cast<std::size_t>(sl.pick));
            if (sl.theta_lo != ParameterLayout::kNone) lows.push_back(static_cast<std::size_t>(sl.theta_lo));
            if (sl.gap != ParameterLayout::kNone) gaps.push_back(static_cast<std::size_t>(sl.gap));
        }
    }
    const double tb = settings.threshold_bound;
    // Largest gap whose softplus keeps theta_hi inside the band when theta_lo = -tb.
    const double max_gap = tb > 0.0 ? std::log(std::expm1(2.0 * tb)) : 0.0;
    const auto project = [&](std::vector<double>& x) {
        if (settings.pick_bound > 0.0) {
            for (std::size_t i : picks) x[i] = std::clamp(x[i], -settings.pick_bound, settings.pick_bound);
        }
        if (tb > 0.0) {
            for (std::size_t i : lows) x[i] = std::clamp(x[i], -tb, tb);
            for (std::size_t i : gaps) x[i] = std::min(x[i], max_gap);
        }
    };
    project(params);
    const double iters = static_cast<double>(settings.iterations);
    const double settle_start = iters * (1.0 - settings.settle_fraction);
    for (int k = 0; k < settings.iterations; ++k) {
        const double rate =
            k < settle_start ? settings.learning_rate : settings.learning_rate * (iters - k) / (iters - settle_start);
        const double tau =
            settings.tau_start * std::pow(settings.tau_end / settings.tau_start, static_cast<double>(k) / iters);
        std::vector<double> grad;
        try {
            tape.clear();
            const LossGraph g =
                build_fused_loss_graph(tape, profile, layout, params, tau, targets, settings.beta_weight, mode);
            tape.backward(g.total);
            grad = tape.gradients(g.leaves);
            if (settings.keep_trace) out.trace.push_back(g.total.value());
        } catch (const NumericError&) {
            ++out.failed;
            if (settings.keep_trace) out.trace.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        b1t *= settings.adam_beta1;
        b2t *= settings.adam_beta2;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g)) continue;
            m1[i] = settings.adam_beta1 * m1[i] + (1.0 - settings.adam_beta1) * g;
            m2[i] = settings.adam_beta2 * m2[i] + (1.0 - settings.adam_beta2) * g * g;
            const double mhat = m1[i] / (1.0 - b1t);
            const double vhat = m2[i] / (1.0 - b2t);
            params[i] -= rate * mhat / (std::sqrt(vhat) + settings.adam_epsilon);
        }
        project(params);
    }
    out.config = layout.unpack(params, settings.tau_end);
    return out;
}

OptimizedPlan run(const ProfileMatrix& profile, const QualityTargets& targets, const OptimizerSettings& settings,
                  BoundMode mode, Variant variant) {
    settings.validate();
    targets.validate();
    profile.validate();

    OptimizedPlan gold = gold_only_plan(profile);
    gold.variant = variant;
    fill_prediction(profile, gold, targets, mode);
    if (!meets({gold.predicted_recall_bound, gold.predicted_precision_bound}, targets)) {
        gold.status = PlanStatus::infeasible_sample;
        return gold;
    }

    DescentResult d = descend(profile, targets, settings, mode);
    OptimizedPlan plan = extract_plan(profile, d.config);
    plan.variant = variant;
    plan.failed_iterations = d.failed;
    prune_idle_stages(profile, plan);
    if (!meets(sample_bounds(profile, plan, targets, mode), targets)) {
        if (auto fixed = repair(profile, plan, targets, mode, settings)) {
            plan = std::move(*fixed);
            plan.repaired = true;
        } else {
            gold.status = PlanStatus::fallback_gold;
            gold.failed_iterations = d.failed;
            gold.loss_trace = std::move(d.trace);
            return gold;
        }
    }
    polish(profile, plan, targets, mode, settings.polish_rounds, settings.polish_keep_bounds);
    plan.status = PlanStatus::feasible;
    plan.loss_trace = std::move(d.trace);
    fill_prediction(profile, plan, targets, mode);
    return plan;
}

} // namespace

void OptimizerSettings::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
    if (iterations < 1) throw InvalidInput("iterations must be at least 1");
    if (!(tau_end > 0.0) || !(tau_start > tau_end)) throw InvalidInput("need tau_start > tau_end > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw InvalidInput("Adam moment parameters must lie in [0,1)");
    }
    if (!(adam_epsilon > 0.0)) throw InvalidInput("adam_epsilon must be positive");
    if (!(beta_weight > 0.0)) throw InvalidInput("beta_weight must be positive");
    if (!(pick_bound >= 0.0) || !(threshold_bound >= 0.0)) throw InvalidInput("projection bounds must be nonnegative");
    if (!(settle_fraction >= 0.0 && settle_fraction <= 1.0)) throw InvalidInput("settle_fraction must lie in [0,1]");
    if (!(repair_step >= 0.0) || repair_rounds < 0 || polish_rounds < 0) throw InvalidInput("repair and polish settings must be nonnegative");
}

const char* to_string(PlanStatus s) {
    switch (s) {
    case PlanStatus::feasible: return "feasible";
    case PlanStatus::fallback_gold: return "fallback_gold";
    case PlanStatus::infeasible_sample: return "infeasible_sample";
    }
    return "unknown";
}

const char* to_string(Variant v) {
    switch (v) {
    case Variant::global: return "global";
    case Variant::local_split: return "local";
    case Variant::independent: return "independent";
    }
    return "unknown";
}

PlanStatus plan_status_from_string(const std::string& name) {
    if (name == "feasible") return PlanStatus::feasible;
    if (name == "fallback_gold") return PlanStatus::fallback_gold;
    if (name == "infeasible_sample") return PlanStatus::infeasible_sample;
    throw InvalidInput("unknown plan status '" + name + "'");
}

Variant variant_from_string(const std::string& name) {
    if (name == "global") return Variant::global;
    if (name == "local" || name == "local_split") return Variant::local_split;
    if (name == "independent") return Variant::independent;
    throw InvalidInput("unknown variant '" + name + "'");
}

OptimizedPlan gold_only_plan(const ProfileMatrix& profile) {
    OptimizedPlan plan;
    for (const auto& op : profile.operators) {
        plan.operators.push_back({op.operator_id, op.kind, {make_stage(op.gold())}});
    }
    return plan;
}

HardEvaluation evaluate_on_sample(const ProfileMatrix& profile, const OptimizedPlan& plan) {
    if (plan.operators.size() != profile.operators.size()) {
        throw InvalidInput("plan and profile disagree on the number of operators");
    }
    const std::size_t n = profile.size();
    const std::size_t m = plan.operators.size();
    HardEvaluation ev;
    ev.flows.resize(m);
    ev.per_operator.resize(m);
    std::vector<std::vector<std::uint8_t>> passes(m, std::vector<std::uint8_t>(n, 0));
    std::vector<std::vector<double>> op_cost(m, std::vector<double>(n, 0.0));

    for (std::size_t o = 0; o < m; ++o) {
        const OperatorPlan& op_plan = plan.operators[o];
        const OperatorProfile& op = profile_for(profile, op_plan, o);
        if (op_plan.cascade.empty()) throw InvalidInput("operator '" + op.operator_id + "' has an empty cascade");
        std::vector<std::size_t> idx;
        for (const auto& s : op_plan.cascade) idx.push_back(candidate_index(op, s.candidate_id));
        ev.flows[o].resize(op_plan.cascade.size());
        HardCounts& pc = ev.per_operator[o];

        if (op.kind == SemanticKind::map) {
            const std::size_t c = idx.front();
            for (std::size_t t = 0; t < n; ++t) {
                const bool ok = op.output_matches(c, t);
                passes[o][t] = ok;
                op_cost[o][t] = op_plan.cascade.front().cost_per_tuple;
                pc.tp += ok;
                pc.fp += !ok;
                pc.fn += !ok;
            }
            ev.flows[o][0] = {n, n, 0, 0};
            continue;
        }
        if (!op_plan.cascade.back().is_gold) {
            throw InvalidInput("cascade of '" + op.operator_id + "' does not end with the gold candidate");
        }
        for (std::size_t t = 0; t < n; ++t) {
            Outcome result = Outcome::unsure;
            for (std::size_t i = 0; i < op_plan.cascade.size() && result == Outcome::unsure; ++i) {
                StageFlow& f = ev.flows[o][i];
                ++f.input;
                op_cost[o][t] += op_plan.cascade[i].cost_per_tuple;
                result = stage_outcome(op_plan.cascade[i], op.candidates[idx[i]], op, t);
                if (result == Outcome::accept) ++f.accepted;
                if (result == Outcome::reject) ++f.rejected;
                if (result == Outcome::unsure) ++f.unsure;
            }
            const bool acc = result == Outcome::accept;
            const bool label = op.gold_labels[t] != 0;
            passes[o][t] = acc;
            pc.tp += acc && label;
            pc.fp += acc && !label;
            pc.fn += !acc && label;
        }
    }

    const auto positive = profile.gold_positive();
    for (std::size_t o = 0; o < m; ++o) {
        for (std::size_t t = 0; t < n; ++t) ev.per_operator[o].cost += op_cost[o][t];
    }
    for (std::size_t t = 0; t < n; ++t) {
        bool alive = true;
        bool matched = true;
        double cost = 0.0;
        for (std::size_t o = 0; o < m; ++o) {
            if (alive) cost += op_cost[o][t];
            if (profile.operators[o].kind == SemanticKind::filter) {
                alive = alive && passes[o][t];
            } else {
                matched = matched && passes[o][t];
            }
        }
        const bool tp = positive[t] && alive && matched;
        ev.global.tp += tp;
        ev.global.fp += alive && !tp;
        ev.global.fn += positive[t] && !tp;
        ev.global.cost += cost;
    }
    return ev;
}

OptimizedPlan extract_plan(const ProfileMatrix& profile, const RelaxedConfig& config) {
    if (config.operators.size() != profile.operators.size()) {
        throw InvalidInput("relaxed config does not match the profile's operators");
    }
    OptimizedPlan plan;
    for (std::size_t o = 0; o < profile.operators.size(); ++o) {
        const OperatorProfile& op = profile.operators[o];
        OperatorPlan op_plan{op.operator_id, op.kind, {}};
        if (op.kind == SemanticKind::map) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < op.candidates.size(); ++c) {
                if (config.operators[o][c].pick_score > config.operators[o][best].pick_score) best = c;
            }
            op_plan.cascade.push_back(make_stage(op.candidates[best]));
        } else {
            for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                const CandidateProfile& cp = op.candidates[c];
                if (!cp.candidate.is_gold && !(config.operators[o][c].pick_score > 0.0)) continue;
                StageChoice s = make_stage(cp);
                if (!cp.candidate.is_gold && cp.candidate.decision_kind == DecisionKind::two_threshold_score) {
                    s.theta_lo = cp.score_center + cp.score_spread * config.operators[o][c].theta_lo;
                    s.theta_hi = cp.score_center + cp.score_spread * config.theta_hi(o, c);
                }
                op_plan.cascade.push_back(s);
            }
        }
        plan.operators.push_back(std::move(op_plan));
    }
    return plan;
}

SampleBounds sample_bounds(const ProfileMatrix& profile, const OptimizedPlan& plan, const QualityTargets& targets,
                           BoundMode mode) {
    return bounds_of(evaluate_on_sample(profile, plan), targets, mode);
}

namespace {

SampleBounds bounds_of(const HardEvaluation& ev, const QualityTargets& targets, BoundMode mode) {
    if (mode == BoundMode::global) {
        return {recall_lower_bound(ev.global.tp, ev.global.fn, targets.alpha_recall).value,
                precision_lower_bound(ev.global.tp, ev.global.fp, targets.alpha_precision).value};
    }
    const double m = static_cast<double>(ev.per_operator.size());
    const double ar = std::pow(targets.alpha_recall, 1.0 / m);
    const double ap = std::pow(targets.alpha_precision, 1.0 / m);
    SampleBounds b{1.0, 1.0};
    for (const auto& c : ev.per_operator) {
        b.recall *= recall_lower_bound(c.tp, c.fn, ar).value;
        b.precision *= precision_lower_bound(c.tp, c.fp, ap).value;
    }
    return b;
}

} // namespace

OptimizedPlan optimize(const ProfileMatrix& profile, const QualityTargets& targets,
                       const OptimizerSettings& settings) {
    return run(profile, targets, settings, BoundMode::global, Variant::global);
}

OptimizedPlan optimize_independent(const ProfileMatrix& profile, const QualityTargets& targets,
                                   const OptimizerSettings& settings) {
    return run(profile, targets, settings, BoundMode::independent, Variant::independent);
}

OptimizedPlan optimize_local_split(const ProfileMatrix& profile, const QualityTargets& targets,
                                   const OptimizerSettings& settings) {
    targets.validate();
    const double m = static_cast<double>(profile.operators.size());
    QualityTargets local = targets;
    local.recall = std::pow(targets.recall, 1.0 / m);
    local.precision = std::pow(targets.precision, 1.0 / m);

    OptimizedPlan plan;
    plan.variant = Variant::local_split;
    plan.status = PlanStatus::feasible;
    plan.predicted_recall_bound = 1.0;
    plan.predicted_precision_bound = 1.0;
    for (std::size_t k = 0; k < profile.operators.size(); ++k) {
        const OptimizedPlan part = optimize(profile.single_operator(k), local, settings);
        plan.operators.push_back(part.operators.front());
        plan.predicted_recall_bound *= part.predicted_recall_bound;
        plan.predicted_precision_bound *= part.predicted_precision_bound;
        plan.failed_iterations += part.failed_iterations;
        plan.repaired = plan.repaired || part.repaired;
        if (part.status == PlanStatus::infeasible_sample) {
            plan.status = PlanStatus::infeasible_sample;
        } else if (part.status == PlanStatus::fallback_gold && plan.status == PlanStatus::feasible) {
            plan.status = PlanStatus::fallback_gold;
        }
    }
    const HardEvaluation ev = evaluate_on_sample(profile, plan);
    plan.predicted_cost = profile.size() > 0
                              ? ev.global.cost / static_cast<double>(profile.size()) * population_of(profile)
                              : 0.0;
    plan.targets = targets;
    return plan;
}

OptimizedPlan optimize_variant(Variant variant, const ProfileMatrix& profile, const QualityTargets& targets,
                               const OptimizerSettings& settings) {
    switch (variant) {
    case Variant::global: return optimize(profile, targets, settings);
    case Variant::local_split: return optimize_local_split(profile, targets, settings);
    case Variant::independent: return optimize_independent(profile, targets, settings);
    }
    throw InvalidInput("unknown variant");
}

} // namespace semopt
