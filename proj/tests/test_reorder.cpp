#include "semopt/error.hpp"
#include "semopt/reorder.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace semopt;
using namespace semopt::testing;

namespace {

// Sequential simulation of the cost model in execution order, independent of the
// library's subset bookkeeping.
double simulate(const std::vector<PhysicalOperator>& ops, const std::vector<std::size_t>& order, double n) {
    std::size_t logical = 0;
    for (const auto& op : ops) logical = std::max(logical, op.logical + 1);
    std::vector<double> remaining(logical, n);
    double cost = 0.0;
    for (std::size_t i : order) {
        cost += ops[i].cost * remaining[ops[i].logical];
        for (std::size_t l = 0; l < logical; ++l)
            remaining[l] *= l == ops[i].logical ? ops[i].sel_intra : ops[i].sel_inter;
    }
    return cost;
}

std::vector<PhysicalOperator> random_ops(std::mt19937_64& rng, std::size_t m) {
    const std::size_t logical = 1 + rng() % std::min<std::size_t>(m, 4);
    std::vector<PhysicalOperator> ops;
    std::vector<std::size_t> stage_count(logical, 0);
    for (std::size_t i = 0; i < m; ++i) {
        PhysicalOperator op;
        op.logical = i < logical ? i : rng() % logical;
        op.stage = stage_count[op.logical]++;
        op.cost = uniform(rng, 0.01, 2.0);
        op.sel_inter = uniform(rng, 0.05, 1.0);
        op.sel_intra = uniform(rng, 0.0, op.sel_inter);
        ops.push_back(op);
    }
    return ops;
}

double brute_force(const std::vector<PhysicalOperator>& ops, double n) {
    std::vector<std::size_t> perm(ops.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        best = std::min(best, order_cost(ops, perm, n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

TEST_CASE("single operator costs its price times the input") {
    const std::vector<PhysicalOperator> ops{{0, 0.3, 0.5, 0.1, 0}};
    const ReorderResult r = reorder(ops, 100.0);
    CHECK(r.order == std::vector<std::size_t>{0});
    CHECK(r.cost == doctest::Approx(30.0));
}

TEST_CASE("cheap selective operator goes first") {
    const std::vector<PhysicalOperator> ops{{0, 10.0, 0.5, 0.0, 0}, {1, 1.0, 0.1, 0.0, 0}};
    const ReorderResult r = reorder(ops, 100.0);
    CHECK(r.order == std::vector<std::size_t>{1, 0});
    CHECK(r.cost == doctest::Approx(1.0 * 100 + 10.0 * 10));
    const std::vector<std::size_t> other{0, 1};
    CHECK(order_cost(ops, other, 100.0) == doctest::Approx(1050.0));
}

TEST_CASE("order cost agrees with a sequential simulation") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const auto ops = random_ops(rng, 1 + rng() % 8);
        std::vector<std::size_t> order(ops.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        CHECK(order_cost(ops, order, 1000.0) == doctest::Approx(simulate(ops, order, 1000.0)).epsilon(1e-12));
    }
}

TEST_CASE("dynamic program matches brute force over permutations") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 150; ++trial) {
        const auto ops = random_ops(rng, 1 + rng() % 7);
        const ReorderResult r = reorder(ops, 500.0);
        REQUIRE(r.order.size() == ops.size());
        std::vector<std::size_t> sorted = r.order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
        CHECK(r.cost == brute_force(ops, 500.0));
        CHECK(r.cost == order_cost(ops, r.order, 500.0));
    }
}

TEST_CASE("result cost does not depend on how operators are listed") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto ops = random_ops(rng, 2 + rng() % 6);
        const double before = reorder(ops, 250.0).cost;
        std::shuffle(ops.begin(), ops.end(), rng);
        CHECK(reorder(ops, 250.0).cost == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("identical stages of one operator run cheapest first") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        auto ops = random_ops(rng, 2 + rng() % 5);
        // A twin of operator 0 with the same selectivities but a different price.
        PhysicalOperator twin = ops[0];
        twin.cost = ops[0].cost * uniform(rng, 1.1, 3.0);
        twin.stage = ops.size();
        ops.push_back(twin);
        if (ops[0].sel_intra >= 1.0) continue;
        const ReorderResult r = reorder(ops, 100.0);
        const auto pos = [&](std::size_t i) { return std::find(r.order.begin(), r.order.end(), i) - r.order.begin(); };
        CHECK(pos(0) < pos(ops.size() - 1));
    }
}

TEST_CASE("cascade order can be enforced") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ops = random_ops(rng, 2 + rng() % 6);
        const ReorderResult free = reorder(ops, 100.0);
        const ReorderResult kept = reorder(ops, 100.0, {.respect_cascade_order = true});
        CHECK(kept.cost >= free.cost);
        for (std::size_t a = 0; a < kept.order.size(); ++a)
            for (std::size_t b = a + 1; b < kept.order.size(); ++b) {
                const auto& x = ops[kept.order[a]];
                const auto& y = ops[kept.order[b]];
                if (x.logical == y.logical) CHECK(x.stage < y.stage);
            }
    }
}

TEST_CASE("too many operators is a capacity error") {
    std::vector<PhysicalOperator> ops(kMaxReorderOperators + 1, PhysicalOperator{0, 1.0, 0.5, 0.1, 0});
    CHECK_THROWS_AS(reorder(ops, 10.0), CapacityError);
    ops.pop_back();
    for (std::size_t i = 0; i < ops.size(); ++i) ops[i].logical = i;
    CHECK_NOTHROW(reorder(ops, 10.0));
}

TEST_CASE("selectivities from a constructed score sample") {
    // Scores 0..99; thresholds put 30 below, 40 between and 30 above.
    ProfileMatrix pm;
    OperatorProfile op;
    op.operator_id = "f";
    CandidateProfile cheap, gold;
    cheap.candidate = {"f@c", "f", "c", DecisionKind::two_threshold_score, 0.1, false};
    gold.candidate = {"f@gold", "f", "gold", DecisionKind::direct_value, 1.0, true};
    for (int t = 0; t < 100; ++t) {
        pm.tuple_keys.push_back("t" + std::to_string(t));
        pm.token_lengths.push_back(10);
        op.gold_labels.push_back(t >= 50);
        cheap.scores.push_back(t);
        cheap.runtimes.push_back(0.1);
        gold.scores.push_back(t >= 50);
        gold.runtimes.push_back(1.0);
    }
    op.candidates = {cheap, gold};
    pm.operators.push_back(op);
    pm.population_size = 100;
    pm.finalize();

    OptimizedPlan plan = gold_only_plan(pm);
    StageChoice stage{"f@c", "c", DecisionKind::two_threshold_score, 29.5, 69.5, 0.1, false};
    plan.operators[0].cascade.insert(plan.operators[0].cascade.begin(), stage);
    const auto est = estimate_selectivities(plan, pm);
    REQUIRE(est.stages.size() == 2);
    CHECK(est.stages[0].sel_inter == doctest::Approx(0.7));
    CHECK(est.stages[0].sel_intra == doctest::Approx(0.4));
    CHECK(est.stages[1].sel_intra == 0.0);
    CHECK(est.stages[1].sel_inter == doctest::Approx(0.5));

    plan.operators[0].cascade[0].theta_lo = -1.0;
    plan.operators[0].cascade[0].theta_hi = -0.5;
    const auto all = estimate_selectivities(plan, pm);
    CHECK(all.stages[0].sel_inter == 1.0);
    CHECK(all.stages[0].sel_intra == 0.0);
    // The gold stage never sees a tuple.
    CHECK(all.stages[1].sel_inter == 1.0);
    CHECK(all.stages[1].sel_intra == 0.0);

    for (const auto& s : est.stages) CHECK(s.sel_intra <= s.sel_inter);
}

TEST_CASE("execution order keeps each cascade in order") {
    std::mt19937_64 rng(6);
    const ProfileMatrix pm = random_profile(rng, {.tuples = 50, .filters = 3, .maps = 1, .candidates = 3});
    OptimizerSettings s;
    s.iterations = 300;
    OptimizedPlan plan = optimize(pm, {.recall = 0.5, .precision = 0.5}, s);
    assign_execution_order(plan, pm);
    std::size_t stages = 0;
    for (const auto& op : plan.operators) stages += op.cascade.size();
    REQUIRE(plan.execution_order.size() == stages);
    std::vector<int> last(plan.operators.size(), -1);
    for (const auto& step : plan.execution_order) {
        CHECK(static_cast<int>(step.stage) == last[step.op] + 1);
        last[step.op] = static_cast<int>(step.stage);
    }
}
