#include "semopt/error.hpp"
#include "semopt/optimizer.hpp"
#include "semopt/serialization.hpp"
#include "semopt/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace semopt;

namespace {

Dataset single_table(std::size_t rows, std::uint64_t seed) {
    Dataset d;
    d.seed = seed;
    Table t;
    t.name = "T";
    for (std::size_t i = 0; i < rows; ++i) {
        Row r;
        r.keys = {{"T", static_cast<std::uint32_t>(i)}};
        r.token_length = 100 + static_cast<std::uint32_t>(i % 201);
        t.rows.push_back(r);
    }
    d.tables.push_back(t);
    d.profiles = default_ladder();
    return d;
}

SyntheticTask filter(const std::string& id, double base_rate, double difficulty) {
    SyntheticTask t;
    t.predicate_id = id;
    t.base_rate = base_rate;
    t.difficulty = difficulty;
    t.scope = {"T"};
    return t;
}

} // namespace

TEST_CASE("empirical agreement matches the model within one point on 10k tuples") {
    Dataset d = single_table(10000, 21);
    for (double difficulty : {1.0, 2.5, 4.0}) {
        const SyntheticTask task = filter("p", 0.4, difficulty);
        d.tasks = {{"p", task}};
        for (const auto& prof : d.profiles) {
            if (prof.is_gold) continue;
            for (ScoreStyle style : {ScoreStyle::log_odds, ScoreStyle::similarity}) {
                CostProfile p = prof;
                p.style = style;
                const double cut = style == ScoreStyle::log_odds ? 0.0 : 0.3;
                double agree = 0.0;
                for (const auto& row : d.tables[0].rows)
                    agree += (candidate_score(d, task, p, row) > cut) == gold_label(d, task, row);
                CAPTURE(p.id);
                CAPTURE(difficulty);
                CHECK(std::abs(agree / 10000.0 - agreement(task, p)) <= 0.01);
            }
        }
    }
}

TEST_CASE("map candidates agree with gold at the modelled rate") {
    Dataset d = single_table(10000, 22);
    SyntheticTask task;
    task.predicate_id = "m";
    task.kind = SemanticKind::map;
    task.difficulty = 2.0;
    task.vocabulary = {"a", "b", "c", "d", "e"};
    task.scope = {"T"};
    d.tasks = {{"m", task}};
    for (const auto& p : d.profiles) {
        double agree = 0.0;
        for (const auto& row : d.tables[0].rows)
            agree += candidate_value(d, task, p, row) == gold_value(d, task, row);
        CAPTURE(p.id);
        CHECK(std::abs(agree / 10000.0 - agreement(task, p)) <= 0.01);
    }
}

TEST_CASE("along one model size, more compression is cheaper and never more accurate") {
    const SyntheticTask task = filter("p", 0.5, 3.0);
    const auto ladder = default_ladder();
    for (double size : {8.0, 70.0}) {
        std::vector<const CostProfile*> rungs;
        for (const auto& p : ladder)
            if (p.model_size == size && !p.is_gold) rungs.push_back(&p);
        REQUIRE(rungs.size() >= 2);
        std::sort(rungs.begin(), rungs.end(),
                  [](auto* a, auto* b) { return a->compression_ratio < b->compression_ratio; });
        for (std::size_t i = 1; i < rungs.size(); ++i) {
            for (double len : {100.0, 200.0, 300.0, 600.0})
                CHECK(rungs[i]->amortized_cost(len) < rungs[i - 1]->amortized_cost(len));
            CHECK(agreement(task, *rungs[i]) <= agreement(task, *rungs[i - 1]));
        }
    }
}

TEST_CASE("batch cost examples") {
    CostProfile p;
    p.id = "x";
    p.model_size = 8.0;
    p.per_token_cost = 0.001;
    const std::vector<std::uint32_t> one{150};
    CHECK(batch_cost(p, one) == doctest::Approx(0.001 * 150 * 8.0));
    // Both fit in one batch, padded to the longer item.
    const std::vector<std::uint32_t> two{100, 200};
    CHECK(batch_cost(p, two) == doctest::Approx(0.001 * 200 * 8.0));
    // A budget holding one item per batch pays for each separately.
    p.memory_budget = 250.0;
    CHECK(batch_cost(p, two) == doctest::Approx(0.001 * 300 * 8.0));
    CHECK(batch_cost(p, std::vector<std::uint32_t>{}) == 0.0);

    const auto ladder = default_ladder();
    std::vector<std::uint32_t> many;
    for (std::uint32_t i = 0; i < 500; ++i) many.push_back(100 + i % 200);
    const auto& r0 = ladder[0];
    const auto& r90 = ladder[2];
    REQUIRE(r0.compression_ratio == 0.0);
    REQUIRE(r90.compression_ratio == 0.9);
    CHECK(batch_cost(r90, many) < batch_cost(r0, many));
}

TEST_CASE("gold-only plan execution reproduces the gold result for every family") {
    for (const auto& family : workload_families()) {
        const QueryInstance q = generate_query(family, 33, {.rows = 300});
        const PreparedQuery prepared = prepare_query(q.plan, q.dataset);
        const ProfileMatrix pm = profile_query(prepared, q.dataset, {.sample_fraction = 0.2, .seed = 1});
        const ExecutionResult run = execute_plan(prepared, q.dataset, gold_only_plan(pm));
        CAPTURE(family);
        CHECK(run.results == execute_gold(q.plan, q.dataset));
        CHECK(run.cost > 0.0);
        const QualityReport rep = compare_results(run.results, execute_gold(q.plan, q.dataset), {});
        CHECK(rep.recall == 1.0);
        CHECK(rep.precision == 1.0);
    }
}

TEST_CASE("query generation is deterministic in its seed") {
    for (const auto& family : workload_families()) {
        std::ostringstream a, b, c;
        write_dataset(a, generate_query(family, 5, {.rows = 200}).dataset);
        write_dataset(b, generate_query(family, 5, {.rows = 200}).dataset);
        write_dataset(c, generate_query(family, 6, {.rows = 200}).dataset);
        CHECK(a.str() == b.str());
        CHECK(a.str() != c.str());
    }
    CHECK_THROWS_AS(generate_query("nope", 1), InvalidInput);
}

TEST_CASE("profiling samples the requested fraction and keeps gold last") {
    const QueryInstance q = generate_query("three_filters", 8, {.rows = 400});
    const PreparedQuery prepared = prepare_query(q.plan, q.dataset);
    const ProfileMatrix pm = profile_query(prepared, q.dataset, {.sample_fraction = 0.25, .seed = 3});
    CHECK(pm.population_size == prepared.input.size());
    CHECK(std::abs(static_cast<double>(pm.size()) - 0.25 * prepared.input.size()) <= 1.0);
    REQUIRE(pm.operators.size() == prepared.pipeline.size());
    for (const auto& op : pm.operators) CHECK(op.candidates.back().candidate.is_gold);
}

TEST_CASE("result comparison") {
    const ResultSet gold{{"a", {}}, {"b", {}}, {"c", {}}, {"d", {}}};
    const ResultSet got{{"a", {}}, {"b", {}}, {"x", {}}};
    const QualityReport r = compare_results(got, gold, {.recall = 0.5, .precision = 0.5});
    CHECK(r.recall == doctest::Approx(0.5));
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.target_met_recall == doctest::Approx(1.0));
    CHECK(compare_results({}, gold, {}).precision == 1.0);
    // A map value that differs from gold is not a hit.
    const ResultSet mg{{"a", {{"v", "1"}}}};
    const ResultSet mw{{"a", {{"v", "2"}}}};
    CHECK(compare_results(mw, mg, {}).recall == 0.0);
}
