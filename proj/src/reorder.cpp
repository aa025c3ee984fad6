#include "semopt/reorder.hpp"

#include "semopt/error.hpp"

#include <limits>

namespace semopt {

SelectivityEstimates estimate_selectivities(const OptimizedPlan& plan, const ProfileMatrix& profile) {
    const HardEvaluation ev = evaluate_on_sample(profile, plan);
    SelectivityEstimates est;
    for (std::size_t o = 0; o < plan.operators.size(); ++o) {
        const auto& op_plan = plan.operators[o];
        for (std::size_t i = 0; i < op_plan.cascade.size(); ++i) {
            const StageFlow& f = ev.flows[o][i];
            StageSelectivity s;
            s.operator_id = op_plan.operator_id;
            s.candidate_id = op_plan.cascade[i].candidate_id;
            s.op = o;
            s.stage = i;
            if (f.input > 0) {
                const double in = static_cast<double>(f.input);
                s.sel_inter = static_cast<double>(f.input - f.rejected) / in;
                s.sel_intra = static_cast<double>(f.unsure) / in;
            }
            est.stages.push_back(s);
        }
    }
    return est;
}

double remaining_tuples(std::span<const PhysicalOperator> ops, std::uint32_t done, std::size_t logical, double n) {
    double remaining = n;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (!(done & (1u << i))) continue;
        remaining *= ops[i].logical == logical ? ops[i].sel_intra : ops[i].sel_inter;
    }
    return remaining;
}

double order_cost(std::span<const PhysicalOperator> ops, std::span<const std::size_t> order, double n) {
    if (ops.size() > kMaxReorderOperators) throw CapacityError("too many operators to order");
    double cost = 0.0;
    std::uint32_t done = 0;
    for (std::size_t i : order) {
        cost += ops[i].cost * remaining_tuples(ops, done, ops[i].logical, n);
        done |= 1u << i;
    }
    return cost;
}

ReorderResult reorder(std::span<const PhysicalOperator> ops, double n, const ReorderOptions& options) {
    const std::size_t m = ops.size();
    if (m > kMaxReorderOperators) {
        throw CapacityError("cannot order " + std::to_string(m) + " operators; the limit is " +
                            std::to_string(kMaxReorderOperators));
    }
    if (m == 0) return {};

    // Stages of the same cascade that must already have run.
    std::vector<std::uint32_t> requires_done(m, 0);
    if (options.respect_cascade_order) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (ops[j].logical == ops[i].logical && ops[j].stage < ops[i].stage) requires_done[i] |= 1u << j;
            }
        }
    }

    const std::uint32_t full = m == 32 ? ~0u : (1u << m) - 1u;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(std::size_t{full} + 1, inf);
    std::vector<std::int8_t> parent(std::size_t{full} + 1, -1);
    best[0] = 0.0;
    for (std::uint32_t s = 0; s < full; ++s) {
        if (best[s] == inf) continue;
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint32_t bit = 1u << i;
            if ((s & bit) || (s & requires_done[i]) != requires_done[i]) continue;
            const std::uint32_t next = s | bit;
            const double c = best[s] + ops[i].cost * remaining_tuples(ops, s, ops[i].logical, n);
            // Predecessor states are visited in increasing order, so on equal cost
            // the first writer wins; compare operator ids explicitly for determinism.
            if (c < best[next] || (c == best[next] && static_cast<int>(i) < parent[next])) {
                best[next] = c;
                parent[next] = static_cast<std::int8_t>(i);
            }
        }
    }
    if (best[full] == inf) throw InvalidInput("cascade precedence admits no execution order");

    ReorderResult result;
    result.cost = best[full];
    result.order.resize(m);
    std::uint32_t s = full;
    for (std::size_t k = m; k-- > 0;) {
        const auto i = static_cast<std::size_t>(parent[s]);
        result.order[k] = i;
        s &= ~(1u << i);
    }
    return result;
}

std::vector<PhysicalOperator> physical_operators(const OptimizedPlan& plan, const SelectivityEstimates& est) {
    std::vector<PhysicalOperator> ops;
    for (const auto& s : est.stages) {
        const StageChoice& stage = plan.operators.at(s.op).cascade.at(s.stage);
        ops.push_back({s.op, stage.cost_per_tuple, s.sel_inter, s.sel_intra, s.stage});
    }
    return ops;
}

void assign_execution_order(OptimizedPlan& plan, const ProfileMatrix& profile) {
    const SelectivityEstimates est = estimate_selectivities(plan, profile);
    const auto ops = physical_operators(plan, est);
    const double n = profile.population_size > 0 ? static_cast<double>(profile.population_size)
                                                 : static_cast<double>(profile.size());
    const ReorderResult r = reorder(ops, n, {.respect_cascade_order = true});
    plan.execution_order.clear();
    for (std::size_t i : r.order) plan.execution_order.push_back({est.stages[i].op, est.stages[i].stage});
}

} // namespace semopt
