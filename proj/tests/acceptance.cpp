// Acceptance run: one PASS/FAIL line per criterion, followed by the measurements.
// Exits 0 when every criterion was evaluated, whatever the verdicts; a crash or an
// exception is the only failure mode ctest sees.

#include "semopt/bench.hpp"
#include "semopt/optimizer.hpp"
#include "semopt/reorder.hpp"
#include "semopt/soft_pipeline.hpp"
#include "semopt/special_functions.hpp"
#include "oracle.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace semopt;
using namespace semopt::testing;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict calibration() {
    BenchOptions o;
    o.targets = BenchOptions::default_targets(0.95);
    o.queries = 200;
    o.seed = 1;
    o.sample_fraction = 0.15;
    const BenchReport r = run_bench(o);
    Verdict v{r.seconds < 600.0, ""};
    for (const auto& s : r.summaries) {
        v.pass = v.pass && s.fraction_met_recall >= 0.93 && s.fraction_met_precision >= 0.93;
        v.detail += fmt("target %.1f: met recall %.3f, met precision %.3f (n=%zu); ", s.target_recall,
                        s.fraction_met_recall, s.fraction_met_precision, s.queries);
    }
    v.detail += fmt("runtime %.0fs", r.seconds);
    return v;
}

Verdict special_functions() {
    double worst = 0.0;
    for (double a : {0.5, 1.0, 2.0, 10.0, 100.0})
        for (double b : {0.5, 1.0, 2.0, 10.0, 100.0})
            for (double p : {0.01, 0.05, 0.5, 0.95})
                worst = std::max(worst, std::fabs(reg_inc_beta(reg_inc_beta_inv(p, a, b), a, b) - p));
    const double empty = recall_lower_bound(0, 0, 0.95).value;

    std::mt19937_64 rng(2024);
    double lowest = 1.0;
    for (double r : {0.6, 0.9}) {
        for (int k : {20, 100}) {
            std::bernoulli_distribution draw(r);
            const int trials = 10000;
            int covered = 0;
            for (int i = 0; i < trials; ++i) {
                int tp = 0;
                for (int j = 0; j < k; ++j) tp += draw(rng);
                covered += r >= recall_lower_bound(tp, k - tp, 0.95).value;
            }
            lowest = std::min(lowest, static_cast<double>(covered) / trials);
        }
    }
    return {worst <= 1e-10 && std::fabs(empty - 0.05) <= 1e-10 && lowest >= 0.93,
            fmt("round-trip worst %.2e; bound(0,0) = %.12f; lowest coverage %.4f over 4x10000 trials", worst, empty,
                lowest)};
}

Verdict gradients() {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const ProfileMatrix pm = random_profile(rng, {.tuples = 30, .filters = 2, .maps = 1, .candidates = 2});
        const ParameterLayout layout(pm);
        const auto p = random_params(rng, pm, layout);
        const double tau = uniform(rng, 0.1, 1.0);
        const QualityTargets t{.recall = uniform(rng, 0.6, 0.95), .precision = uniform(rng, 0.6, 0.95)};
        Tape tape;
        const LossGraph g = build_loss_graph(tape, pm, layout, p, tau, t, 10.0);
        tape.backward(g.total);
        const auto grad = tape.gradients(g.leaves);
        for (std::size_t i = 0; i < p.size(); ++i) {
            auto up = p, down = p;
            const double h = 1e-4;
            up[i] += h;
            down[i] -= h;
            const double fd = (loss_value(pm, layout.unpack(up, tau), t, 10.0).total -
                               loss_value(pm, layout.unpack(down, tau), t, 10.0).total) /
                              (2 * h);
            // Relative error, with components below 1e-6 compared on that absolute scale.
            worst = std::max(worst, std::fabs(grad[i] - fd) / std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6}));
            ++checked;
        }
    }
    return {worst <= 1e-4, fmt("worst relative error %.2e over %zu partials in 50 configurations", worst, checked)};
}

Verdict oracle_gap() {
    std::mt19937_64 rng(42);
    int over = 0;
    int violations = 0;
    double worst = 0.0, sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const FilterInstance in = single_filter_instance(rng, 60, 1 + rng() % 3);
        const double best = exhaustive_best_cost(in);
        const OptimizedPlan plan = optimize(in.profile, in.targets);
        const double ratio = evaluate_on_sample(in.profile, plan).global.cost / best;
        violations += !meets(sample_bounds(in.profile, plan, in.targets), in.targets);
        over += ratio > 1.05 + 1e-12;
        worst = std::max(worst, ratio);
        sum += ratio;
    }
    return {over == 0 && violations == 0,
            fmt("%d/100 above 1.05x the exhaustive optimum (mean %.3f, worst %.3f); %d sample-bound violations", over,
                sum / 100, worst, violations)};
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

Verdict reordering() {
    std::mt19937_64 rng(5);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng() % 8;
        const std::size_t logical = 1 + rng() % std::min<std::size_t>(m, 4);
        std::vector<PhysicalOperator> ops;
        std::vector<std::size_t> stages(logical, 0);
        for (std::size_t i = 0; i < m; ++i) {
            PhysicalOperator op;
            op.logical = i < logical ? i : rng() % logical;
            op.stage = stages[op.logical]++;
            op.cost = uniform(rng, 0.01, 2.0);
            op.sel_inter = uniform(rng, 0.05, 1.0);
            op.sel_intra = uniform(rng, 0.0, op.sel_inter);
            ops.push_back(op);
        }
        mismatches += reorder(ops, 1000.0).cost != brute_force(ops, 1000.0);
    }
    return {mismatches == 0, fmt("%d/1000 instances differ from the permutation minimum", mismatches)};
}

Verdict discretization() {
    std::mt19937_64 rng(6);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 100; ++trial) {
        const ProfileMatrix pm = random_profile(
            rng, {.tuples = 40, .filters = 1 + trial % 3, .maps = trial % 2, .candidates = 3, .with_direct = true});
        const ParameterLayout layout(pm);
        const RelaxedConfig cfg = layout.unpack(saturated_params(rng, pm, layout), 1e-4);
        const SoftCounts soft = global_soft_counts(pm, cfg);
        const HardCounts hard = evaluate_on_sample(pm, extract_plan(pm, cfg)).global;
        worst = std::max({worst, std::fabs(soft.tp - hard.tp), std::fabs(soft.fp - hard.fp),
                          std::fabs(soft.fn - hard.fn), std::fabs(soft.cost - hard.cost)});
    }
    return {worst <= 1e-6, fmt("worst soft/hard count difference %.2e over 100 configurations", worst)};
}

Verdict ablation() {
    const auto run = [](Variant v) {
        BenchOptions o;
        o.targets = {{.recall = 0.9, .precision = 0.9}};
        o.variant = v;
        o.queries = 200;
        o.seed = 7;
        o.families = {"easy_hard"};
        o.workload.rows = 4000;
        return run_bench(o);
    };
    const BenchReport global = run(Variant::global);
    const BenchReport local = run(Variant::local_split);
    const BenchReport independent = run(Variant::independent);
    const auto violations = [](const BenchReport& r) {
        int v = 0;
        for (const auto& q : r.results) v += !(q.meets_recall() && q.meets_precision());
        return v;
    };
    const double n = 200.0;
    const int vg = violations(global), vi = violations(independent);
    const double ratio = local.summaries[0].mean_cost / global.summaries[0].mean_cost;
    // One-sided pooled two-proportion z-test for independent > global.
    const double pooled = (vg + vi) / (2 * n);
    const double se = std::sqrt(pooled * (1 - pooled) * 2 / n);
    const double z = se > 0 ? (vi / n - vg / n) / se : 0.0;
    const double p = 0.5 * std::erfc(z / std::sqrt(2.0));
    return {ratio >= 1.1 && p < 0.05,
            fmt("local/global mean cost %.3f; violations global %d/200, independent %d/200, p = %.3g", ratio, vg, vi,
                p)};
}

Verdict ladder() {
    BenchReport r[2];
    for (int l = 0; l < 2; ++l) {
        BenchOptions o;
        o.targets = BenchOptions::default_targets();
        o.queries = 100;
        o.seed = 11;
        o.workload.ladder = l == 0 ? default_ladder() : uncompressed_ladder();
        r[l] = run_bench(o);
    }
    bool pass = true;
    std::vector<double> speedup;
    std::string detail;
    for (std::size_t t = 0; t < 3; ++t) {
        speedup.push_back(r[1].summaries[t].mean_cost / r[0].summaries[t].mean_cost);
        pass = pass && speedup.back() > 1.0;
        detail += fmt("target %.1f speedup %.3f; ", r[0].summaries[t].target_recall, speedup.back());
    }
    pass = pass && speedup.front() > speedup.back();
    return {pass, detail + "100 queries per target"};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"1 guarantee calibration", calibration},   {"2 special functions", special_functions},
        {"3 gradient correctness", gradients},      {"4 optimizer oracle gap", oracle_gap},
        {"5 reordering exactness", reordering},     {"6 discretization consistency", discretization},
        {"7 ablation trends", ablation},            {"8 ladder trend", ladder},
    };
    int passed = 0;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        const Verdict v = check();
        passed += v.pass;
        std::printf("%s criterion %s: %s (%.0fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria pass\n", passed, criteria.size());
    return 0;
}
