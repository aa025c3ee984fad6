#include "semopt/bench.hpp"
#include "semopt/reorder.hpp"
#include "semopt/serialization.hpp"
#include "semopt/special_functions.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <vector>

namespace py = pybind11;
using namespace semopt;

namespace {

// Python passes structured data as JSON text; the package wrapper converts to dicts.

std::vector<PhysicalOperator> to_ops(const std::vector<std::tuple<std::size_t, double, double, double>>& ops) {
    std::vector<PhysicalOperator> out;
    for (const auto& [logical, cost, inter, intra] : ops) {
        PhysicalOperator op;
        op.logical = logical;
        op.cost = cost;
        op.sel_inter = inter;
        op.sel_intra = intra;
        out.push_back(op);
    }
    return out;
}

std::string bench_json(const std::string& config) {
    const BenchOptions options = bench_options_from_json(Json::parse(config));
    BenchReport report;
    {
        py::gil_scoped_release release;
        report = run_bench(options);
    }
    Json results = Json::array();
    for (const auto& r : report.results) results.push_back(to_json(r));
    Json summaries = Json::array();
    for (const auto& s : report.summaries) summaries.push_back(to_json(s));
    return Json{{"config", to_json(options)},
                {"summaries", std::move(summaries)},
                {"results", std::move(results)},
                {"csv", results_csv(report.results)}}
        .dump();
}

std::string run_one_json(const std::string& family, std::uint64_t seed, const std::string& config) {
    const BenchOptions options = bench_options_from_json(Json::parse(config));
    py::gil_scoped_release release;
    const QueryInstance q = generate_query(family, seed, options.workload, "q0");
    const PreparedQuery prepared = prepare_query(q.plan, q.dataset);
    const ProfileMatrix profile =
        profile_query(prepared, q.dataset, {.sample_fraction = options.sample_fraction, .seed = sample_seed(q)});
    const ResultSet gold = execute_gold(q.plan, q.dataset);
    Json runs = Json::array();
    for (const auto& t : options.targets) {
        OptimizedPlan plan = optimize_variant(options.variant, profile, t, options.optimizer);
        assign_execution_order(plan, profile);
        const ExecutionResult run = execute_plan(prepared, q.dataset, plan);
        const QualityReport rep = compare_results(run.results, gold, t);
        runs.push_back({{"plan", to_json(plan)},
                        {"sample_bounds_meet", sample_bounds_meet(profile, plan)},
                        {"cost", run.cost},
                        {"recall", rep.recall},
                        {"precision", rep.precision}});
    }
    return Json{{"query_id", q.query_id},
                {"family", q.family},
                {"logical_plan", to_json(q.plan)},
                {"sample_size", profile.size()},
                {"population_size", profile.population_size},
                {"runs", std::move(runs)}}
        .dump();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the semopt package";

    m.def("reg_inc_beta", &reg_inc_beta, py::arg("x"), py::arg("a"), py::arg("b"));
    m.def("reg_inc_beta_inv", &reg_inc_beta_inv, py::arg("p"), py::arg("a"), py::arg("b"));
    m.def(
        "recall_lower_bound",
        [](double tp, double fn, double alpha) { return recall_lower_bound(tp, fn, alpha).value; }, py::arg("tp"),
        py::arg("fn"), py::arg("alpha") = 0.95);
    m.def(
        "precision_lower_bound",
        [](double tp, double fp, double alpha) { return precision_lower_bound(tp, fp, alpha).value; },
        py::arg("tp"), py::arg("fp"), py::arg("alpha") = 0.95);

    m.def(
        "reorder",
        [](const std::vector<std::tuple<std::size_t, double, double, double>>& ops, double n) {
            const auto phys = to_ops(ops);
            const ReorderResult r = reorder(phys, n);
            return py::make_tuple(r.order, r.cost);
        },
        py::arg("ops"), py::arg("n"),
        "Exact minimum-cost order of (logical, cost, sel_inter, sel_intra) operators over n tuples.");
    m.def(
        "order_cost",
        [](const std::vector<std::tuple<std::size_t, double, double, double>>& ops,
           const std::vector<std::size_t>& order, double n) { return order_cost(to_ops(ops), order, n); },
        py::arg("ops"), py::arg("order"), py::arg("n"));

    m.def("workload_families", &workload_families);
    m.def("_bench", &bench_json, py::arg("config"));
    m.def("_run_query", &run_one_json, py::arg("family"), py::arg("seed"), py::arg("config"));
}
