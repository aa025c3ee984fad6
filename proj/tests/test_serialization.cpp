#include "semopt/bench.hpp"
#include "semopt/error.hpp"
#include "semopt/serialization.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace semopt;
using namespace semopt::testing;

TEST_CASE("plans survive a json round trip") {
    const QueryInstance q = generate_query("join", 4, {.rows = 200});
    const LogicalPlan back = plan_from_json(to_json(q.plan));
    CHECK(to_json(back).dump() == to_json(q.plan).dump());
    CHECK(back.nodes == q.plan.nodes);
    CHECK(back.edges == q.plan.edges);
    CHECK_THROWS_AS(plan_from_json(Json::parse(R"({"nodes": 3})")), InvalidInput);
}

TEST_CASE("optimized plans survive a json round trip") {
    std::mt19937_64 rng(2);
    const ProfileMatrix pm = random_profile(rng, {.tuples = 40, .filters = 2, .maps = 1});
    OptimizerSettings s;
    s.iterations = 200;
    s.keep_trace = true;
    const OptimizedPlan plan = optimize(pm, {.recall = 0.6, .precision = 0.6}, s);
    const Json j = to_json(plan);
    CHECK(to_json(optimized_plan_from_json(j)).dump() == j.dump());
}

TEST_CASE("dataset and profile streams round trip") {
    const QueryInstance q = generate_query("filter_map", 7, {.rows = 200});
    std::stringstream ds;
    write_dataset(ds, q.dataset);
    const Dataset d = read_dataset(ds);
    std::ostringstream again;
    write_dataset(again, d);
    CHECK(again.str() == ds.str());

    const PreparedQuery prepared = prepare_query(q.plan, q.dataset);
    const ProfileMatrix pm = profile_query(prepared, q.dataset, {.sample_fraction = 0.3, .seed = 2});
    std::stringstream ps;
    write_profile(ps, pm);
    const ProfileMatrix back = read_profile(ps);
    std::ostringstream again2;
    write_profile(again2, back);
    CHECK(again2.str() == ps.str());
    CHECK(back.size() == pm.size());

    std::istringstream junk("not json\n");
    CHECK_THROWS_AS(read_dataset(junk), InvalidInput);
}

TEST_CASE("query directories round trip") {
    const QueryInstance q = generate_query("two_filters", 12, {.rows = 150}, "qx");
    const auto dir = std::filesystem::temp_directory_path() / "semopt_query_roundtrip";
    std::filesystem::remove_all(dir);
    write_query(dir, q);
    const QueryInstance back = read_query(dir);
    CHECK(back.query_id == "qx");
    CHECK(back.family == q.family);
    CHECK(execute_gold(back.plan, back.dataset) == execute_gold(q.plan, q.dataset));
    std::filesystem::remove_all(dir);
}

TEST_CASE("catalog, settings and bench options round trip") {
    const auto ladder = default_ladder();
    const auto back = catalog_from_json(catalog_to_json(ladder));
    CHECK(catalog_to_json(back).dump() == catalog_to_json(ladder).dump());

    OptimizerSettings s;
    s.iterations = 77;
    s.settle_fraction = 0.25;
    CHECK(to_json(optimizer_settings_from_json(to_json(s))).dump() == to_json(s).dump());
    CHECK_THROWS_AS(optimizer_settings_from_json(Json::parse(R"({"bogus": 1})")), InvalidInput);
    // Keys absent from the document keep the base values.
    CHECK(optimizer_settings_from_json(Json::parse(R"({"beta_weight": 4})"), s).iterations == 77);

    BenchOptions b;
    b.queries = 5;
    b.seed = 99;
    b.targets = BenchOptions::default_targets();
    b.families = {"join"};
    CHECK(to_json(bench_options_from_json(to_json(b))).dump() == to_json(b).dump());
}

TEST_CASE("query results round trip") {
    QueryResult r;
    r.query_id = "q3";
    r.family = "join";
    r.variant = Variant::independent;
    r.cost = 12.5;
    r.recall = 0.875;
    r.status = PlanStatus::fallback_gold;
    CHECK(to_json(query_result_from_json(to_json(r))).dump() == to_json(r).dump());
}

TEST_CASE("percentile interpolates linearly") {
    CHECK(std::isnan(percentile({}, 0.5)));
    CHECK(percentile({3.0}, 0.05) == 3.0);
    CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
    CHECK(percentile({0.0, 10.0}, 0.05) == doctest::Approx(0.5));
}

TEST_CASE("bench output does not depend on the worker count") {
    BenchOptions b;
    b.queries = 4;
    b.seed = 5;
    b.targets = {{.recall = 0.6, .precision = 0.6}};
    b.families = {"two_filters", "filter_map"};
    b.workload.rows = 300;
    b.optimizer.iterations = 300;
    const BenchReport one = run_bench(b);
    b.jobs = 3;
    const BenchReport three = run_bench(b);
    const std::string csv = results_csv(one.results);
    CHECK(csv == results_csv(three.results));
    CHECK(csv.rfind("query_id,variant,target_r,target_p,cost,recall,precision,target_met_r,target_met_p,status", 0) ==
          0);
    REQUIRE(one.summaries.size() == 1);
    CHECK(one.summaries[0].queries == 4);
}
