#include "semopt/error.hpp"
#include "semopt/plan_ir.hpp"
#include "semopt/simulator.hpp"

#include <doctest.h>

using namespace semopt;

namespace {

struct Builder {
    LogicalPlan plan;

    Builder& scan(const std::string& id, const std::string& table) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::scan;
        op.table = table;
        plan.nodes.push_back(op);
        return *this;
    }
    Builder& rel_filter(const std::string& id, const std::string& in, const std::string& column,
                        const std::string& value) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::relational_filter;
        op.filter = ColumnPredicate{column, CompareOp::eq, value};
        plan.nodes.push_back(op);
        plan.edges.emplace_back(in, id);
        return *this;
    }
    Builder& join(const std::string& id, const std::string& l, const std::string& r, const std::string& lc,
                  const std::string& rc) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::relational_join;
        op.left_column = lc;
        op.right_column = rc;
        plan.nodes.push_back(op);
        plan.edges.emplace_back(l, id);
        plan.edges.emplace_back(r, id);
        return *this;
    }
    Builder& sem(const std::string& id, OperatorKind kind, const std::string& in, const std::string& out = "") {
        LogicalOperator op;
        op.id = id;
        op.kind = kind;
        op.predicate_id = "p_" + id;
        op.output_column = out;
        plan.nodes.push_back(op);
        plan.edges.emplace_back(in, id);
        return *this;
    }
    Builder& sem_join(const std::string& id, const std::string& l, const std::string& r) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::semantic_join;
        op.predicate_id = "p_" + id;
        plan.nodes.push_back(op);
        plan.edges.emplace_back(l, id);
        plan.edges.emplace_back(r, id);
        return *this;
    }
};

} // namespace

TEST_CASE("targets validation") {
    QualityTargets t;
    CHECK(t.alpha_recall == 0.95);
    CHECK(t.alpha_precision == 0.95);
    CHECK_NOTHROW(t.validate());
    t.recall = 1.2;
    CHECK_THROWS_AS(t.validate(), InvalidInput);
    t.recall = 0.5;
    t.alpha_precision = 1.0;
    CHECK_THROWS_AS(t.validate(), InvalidInput);
}

TEST_CASE("plan validation rejects malformed DAGs") {
    Builder ok;
    ok.scan("s", "T").sem("f", OperatorKind::semantic_filter, "s");
    CHECK_NOTHROW(ok.plan.validate());
    CHECK(ok.plan.sink() == "f");

    Builder cyc = ok;
    cyc.plan.edges.emplace_back("f", "s");
    CHECK_THROWS_AS(cyc.plan.validate(), InvalidInput);

    Builder dangling = ok;
    dangling.plan.edges.emplace_back("f", "nowhere");
    CHECK_THROWS_AS(dangling.plan.validate(), InvalidInput);

    Builder two_sinks = ok;
    two_sinks.scan("s2", "U");
    CHECK_THROWS_AS(two_sinks.plan.validate(), InvalidInput);

    Builder no_pred = ok;
    no_pred.plan.nodes[1].predicate_id.clear();
    CHECK_THROWS_AS(no_pred.plan.validate(), InvalidInput);

    Builder map_no_col;
    map_no_col.scan("s", "T").sem("m", OperatorKind::semantic_map, "s");
    CHECK_THROWS_AS(map_no_col.plan.validate(), InvalidInput);

    Builder filter_with_col;
    filter_with_col.scan("s", "T").sem("f", OperatorKind::semantic_filter, "s", "x");
    CHECK_THROWS_AS(filter_with_col.plan.validate(), InvalidInput);

    Builder bad_arity;
    bad_arity.scan("a", "A").scan("b", "B").sem("f", OperatorKind::semantic_filter, "a");
    bad_arity.plan.edges.emplace_back("b", "f");
    CHECK_THROWS_AS(bad_arity.plan.validate(), InvalidInput);
}

TEST_CASE("pull-up hoists semantic operators over commuting relational ones") {
    // scan -> rel_filter -> sem_filter -> join(other) -> sem_map
    Builder b;
    b.scan("s", "T").scan("u", "U").rel_filter("r", "s", "T.category", "a").sem("f", OperatorKind::semantic_filter, "r");
    b.join("j", "f", "u", "T.id", "U.id").sem("m", OperatorKind::semantic_map, "j", "diag");
    b.plan.annotate_scopes();
    const LogicalPlan out = pull_up_semantic(b.plan);
    CHECK_NOTHROW(out.validate());
    CHECK(out.semantic_pipeline() == std::vector<std::string>{"f", "m"});
    CHECK(out.inputs_of("f") == std::vector<std::string>{"j"});
    CHECK(out.inputs_of("m") == std::vector<std::string>{"f"});
    CHECK(out.sink() == "m");
    CHECK(out.semantic_predicates() == b.plan.semantic_predicates());
}

TEST_CASE("pull-up leaves a map whose output a relational filter reads") {
    Builder b;
    b.scan("s", "T").sem("m", OperatorKind::semantic_map, "s", "diag").rel_filter("r", "m", "diag", "flu");
    b.plan.annotate_scopes();
    const LogicalPlan out = pull_up_semantic(b.plan);
    CHECK(out == b.plan);
}

TEST_CASE("pull-up is the identity without semantic operators and is idempotent") {
    Builder rel;
    rel.scan("s", "T").rel_filter("r", "s", "T.year", "2004");
    CHECK(pull_up_semantic(rel.plan) == rel.plan);

    Builder b;
    b.scan("s", "T").sem("f1", OperatorKind::semantic_filter, "s").rel_filter("r", "f1", "T.year", "2004");
    b.sem("f2", OperatorKind::semantic_filter, "r");
    b.plan.annotate_scopes();
    const LogicalPlan once = pull_up_semantic(b.plan);
    CHECK(pull_up_semantic(once) == once);
    CHECK(once.semantic_pipeline() == std::vector<std::string>{"f1", "f2"});
    CHECK(once.semantic_predicates() == b.plan.semantic_predicates());
}

TEST_CASE("semantic join becomes cartesian product plus semantic filter") {
    Builder none;
    none.scan("s", "T").sem("f", OperatorKind::semantic_filter, "s");
    CHECK(rewrite_semantic_join(none.plan) == none.plan);

    Builder b;
    b.scan("a", "A").scan("bb", "B").scan("c", "C").sem_join("j1", "a", "bb").sem_join("j2", "j1", "c");
    b.plan.annotate_scopes();
    const LogicalPlan out = rewrite_semantic_join(b.plan);
    CHECK_NOTHROW(out.validate());
    std::size_t products = 0;
    std::size_t filters = 0;
    for (const auto& n : out.nodes) {
        CHECK(n.kind != OperatorKind::semantic_join);
        products += n.kind == OperatorKind::cartesian_product;
        filters += n.kind == OperatorKind::semantic_filter;
    }
    CHECK(products == 2);
    CHECK(filters == 2);
    CHECK(out.semantic_predicates() == b.plan.semantic_predicates());
    // Every semantic filter reads a product.
    for (const auto& n : out.nodes) {
        if (n.kind != OperatorKind::semantic_filter) continue;
        const auto in = out.inputs_of(n.id);
        REQUIRE(in.size() == 1);
        CHECK(out.node(in[0]).kind == OperatorKind::cartesian_product);
    }
    CHECK(out.topological_order().size() == out.nodes.size());
}

TEST_CASE("rewrites preserve the gold result on generated data") {
    for (const auto& family : workload_families()) {
        for (std::uint64_t seed : {1u, 2u}) {
            const QueryInstance q = generate_query(family, seed, {.rows = 300});
            const LogicalPlan rewritten = pull_up_semantic(rewrite_semantic_join(q.plan));
            CAPTURE(family);
            CHECK(execute_gold(rewritten, q.dataset) == execute_gold(q.plan, q.dataset));
            CHECK(rewritten.semantic_predicates() == q.plan.semantic_predicates());
            CHECK(pull_up_semantic(rewritten) == rewritten);
        }
    }
}

TEST_CASE("candidate catalog rules") {
    std::vector<PhysicalCandidate> c{{"a", "f", "p", DecisionKind::two_threshold_score, 0.1, false},
                                     {"g", "f", "gold", DecisionKind::direct_value, 1.0, true}};
    CHECK_NOTHROW(validate_candidates(c));
    auto no_gold = c;
    no_gold[1].is_gold = false;
    CHECK_THROWS_AS(validate_candidates(no_gold), InvalidInput);
    auto cheap_gold = c;
    cheap_gold[0].cost_per_tuple = 2.0;
    CHECK_THROWS_AS(validate_candidates(cheap_gold), InvalidInput);
    auto negative = c;
    negative[0].cost_per_tuple = -0.1;
    CHECK_THROWS_AS(validate_candidates(negative), InvalidInput);
}

TEST_CASE("column predicates compare numerically when both sides are numbers") {
    CHECK(ColumnPredicate{"x", CompareOp::ge, "2004"}.matches("2010"));
    CHECK_FALSE(ColumnPredicate{"x", CompareOp::ge, "2004"}.matches("999"));
    CHECK(ColumnPredicate{"x", CompareOp::eq, "1.0"}.matches("1"));
    CHECK(ColumnPredicate{"x", CompareOp::ne, "flu"}.matches("cold"));
    CHECK(ColumnPredicate{"x", CompareOp::lt, "b"}.matches("a"));
}
