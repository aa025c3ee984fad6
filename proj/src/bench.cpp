#include "semopt/bench.hpp"

#include "semopt/error.hpp"
#include "semopt/hashing.hpp"
#include "semopt/reorder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace semopt {

namespace {

bool meets(const SampleBounds& b, const QualityTargets& t) { return b.recall >= t.recall && b.precision >= t.precision; }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Shortest text that reads back to the same double.
std::string format_number(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

} // namespace

std::vector<QualityTargets> BenchOptions::default_targets(double alpha) {
    std::vector<QualityTargets> out;
    for (double t : {0.5, 0.7, 0.9}) out.push_back({t, t, alpha, alpha});
    return out;
}

void BenchOptions::validate() const {
    if (targets.empty()) throw InvalidInput("bench needs at least one target");
    for (const auto& t : targets) t.validate();
    if (queries == 0) throw InvalidInput("bench needs at least one query");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) throw InvalidInput("sample_fraction must lie in (0,1]");
    if (jobs == 0) throw InvalidInput("jobs must be at least 1");
    const auto& known = workload_families();
    for (const auto& f : families) {
        if (std::find(known.begin(), known.end(), f) == known.end()) throw InvalidInput("unknown workload family " + f);
    }
    optimizer.validate();
}

QuerySpec bench_query_spec(const BenchOptions& options, std::size_t i) {
    const auto& families = options.families.empty() ? workload_families() : options.families;
    return {"q" + std::to_string(i), families[i % families.size()], mix({options.seed, i})};
}

std::uint64_t sample_seed(const QueryInstance& query) { return mix({query.seed, fnv1a("sample")}); }

bool sample_bounds_meet(const ProfileMatrix& profile, const OptimizedPlan& plan) {
    switch (plan.variant) {
    case Variant::global: return meets(sample_bounds(profile, plan, plan.targets, BoundMode::global), plan.targets);
    case Variant::independent:
        return meets(sample_bounds(profile, plan, plan.targets, BoundMode::independent), plan.targets);
    case Variant::local_split: {
        const double m = static_cast<double>(plan.operators.size());
        QualityTargets local = plan.targets;
        local.recall = std::pow(plan.targets.recall, 1.0 / m);
        local.precision = std::pow(plan.targets.precision, 1.0 / m);
        for (std::size_t k = 0; k < plan.operators.size(); ++k) {
            OptimizedPlan part;
            part.operators = {plan.operators[k]};
            if (!meets(sample_bounds(profile.single_operator(k), part, local, BoundMode::global), local)) return false;
        }
        return true;
    }
    }
    return false;
}

std::vector<QueryResult> run_query(const QueryInstance& query, std::span<const QualityTargets> targets,
                                   Variant variant, const OptimizerSettings& settings, double sample_fraction) {
    const PreparedQuery prepared = prepare_query(query.plan, query.dataset);
    const ProfileMatrix profile =
        profile_query(prepared, query.dataset, {.sample_fraction = sample_fraction, .seed = sample_seed(query)});
    const ResultSet gold = execute_gold(query.plan, query.dataset);

    OptimizedPlan gold_plan = gold_only_plan(profile);
    assign_execution_order(gold_plan, profile);
    const double gold_cost = execute_plan(prepared, query.dataset, gold_plan).cost;

    std::vector<QueryResult> out;
    for (const QualityTargets& t : targets) {
        const auto start = std::chrono::steady_clock::now();
        OptimizedPlan plan = optimize_variant(variant, profile, t, settings);
        if (plan.status == PlanStatus::feasible && !sample_bounds_meet(profile, plan)) {
            throw std::logic_error("query " + query.query_id + ": plan reported feasible misses its sample bounds");
        }
        assign_execution_order(plan, profile);
        const ExecutionResult run = execute_plan(prepared, query.dataset, plan);
        const QualityReport q = compare_results(run.results, gold, t);

        QueryResult r;
        r.query_id = query.query_id;
        r.family = query.family;
        r.variant = variant;
        r.targets = t;
        r.status = plan.status;
        r.repaired = plan.repaired;
        r.cost = run.cost;
        r.gold_cost = gold_cost;
        r.predicted_cost = plan.predicted_cost;
        r.recall = q.recall;
        r.precision = q.precision;
        r.target_met_recall = q.target_met_recall;
        r.target_met_precision = q.target_met_precision;
        r.recall_bound = plan.predicted_recall_bound;
        r.precision_bound = plan.predicted_precision_bound;
        r.sample_size = profile.size();
        r.population_size = profile.population_size;
        r.seconds = seconds_since(start);
        out.push_back(std::move(r));
    }
    return out;
}

BenchReport run_bench(const BenchOptions& options) {
    options.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t nq = options.queries;
    const std::size_t nt = options.targets.size();
    std::vector<std::vector<QueryResult>> per_query(nq);

    // Each worker generates its own queries; query i depends only on (seed, i).
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < nq; i = next++) {
            try {
                const QuerySpec spec = bench_query_spec(options, i);
                const QueryInstance q = generate_query(spec.family, spec.seed, options.workload, spec.query_id);
                per_query[i] = run_query(q, options.targets, options.variant, options.optimizer,
                                         options.sample_fraction);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = nq;
            }
        }
    };
    const unsigned jobs = std::min<unsigned>(options.jobs, static_cast<unsigned>(nq));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    BenchReport report;
    report.results.reserve(nq * nt);
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t i = 0; i < nq; ++i) report.results.push_back(per_query[i][t]);
    }
    report.summaries = summarize(report.results);
    report.seconds = seconds_since(start);
    return report;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return values[lo];
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<TargetSummary> summarize(std::span<const QueryResult> results) {
    std::vector<TargetSummary> out;
    std::vector<std::vector<const QueryResult*>> groups;
    for (const auto& r : results) {
        std::size_t g = 0;
        while (g < out.size() && !(out[g].target_recall == r.targets.recall &&
                                   out[g].target_precision == r.targets.precision)) {
            ++g;
        }
        if (g == out.size()) {
            out.push_back({.target_recall = r.targets.recall, .target_precision = r.targets.precision});
            groups.emplace_back();
        }
        groups[g].push_back(&r);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        TargetSummary& s = out[g];
        std::vector<double> met_r;
        std::vector<double> met_p;
        for (const QueryResult* r : groups[g]) {
            ++s.queries;
            s.fraction_met_recall += r->meets_recall();
            s.fraction_met_precision += r->meets_precision();
            s.mean_cost += r->cost;
            s.mean_gold_cost += r->gold_cost;
            s.infeasible += r->status == PlanStatus::infeasible_sample;
            s.fallback += r->status == PlanStatus::fallback_gold;
            met_r.push_back(r->target_met_recall);
            met_p.push_back(r->target_met_precision);
        }
        const double n = static_cast<double>(s.queries);
        s.fraction_met_recall /= n;
        s.fraction_met_precision /= n;
        s.mean_cost /= n;
        s.mean_gold_cost /= n;
        s.p5_target_met_recall = percentile(met_r, 0.05);
        s.p5_target_met_precision = percentile(met_p, 0.05);
    }
    return out;
}

std::string results_csv(std::span<const QueryResult> results) {
    std::ostringstream os;
    os << "query_id,variant,target_r,target_p,cost,recall,precision,target_met_r,target_met_p,status\n";
    for (const auto& r : results) {
        os << r.query_id << ',' << to_string(r.variant) << ',' << format_number(r.targets.recall) << ','
           << format_number(r.targets.precision) << ',' << format_number(r.cost) << ',' << format_number(r.recall)
           << ',' << format_number(r.precision) << ',' << format_number(r.target_met_recall) << ','
           << format_number(r.target_met_precision) << ',' << to_string(r.status) << '\n';
    }
    return os.str();
}

} // namespace semopt
