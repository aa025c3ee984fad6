#include "semopt/simulator.hpp"

#include "semopt/error.hpp"
#include "semopt/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string_view>

namespace semopt {

namespace {

/// Uniform in [0, 1).
double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

double standard_normal(std::uint64_t h) {
    const double u1 = 1.0 - unit(splitmix64(h));  // (0, 1]
    const double u2 = unit(splitmix64(h ^ 0x5851f42d4c957f2dULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double task_separation(const Dataset& data, const SyntheticTask& task, const CostProfile& profile,
                       const Row& row) {
    bool correlated = false;
    if (!task.correlated_with.empty()) {
        correlated = gold_label(data, data.task(task.correlated_with), row);
    }
    return task.difficulty * profile.separation_factor() * (correlated ? 1.0 - task.correlation_penalty : 1.0);
}

std::size_t gold_index(const Dataset& data, const SyntheticTask& task, const Row& row) {
    const std::uint64_t h = mix({data.seed, fnv1a(task.predicate_id), fnv1a("value"), fnv1a(row.key_over(task.scope))});
    return static_cast<std::size_t>(h % task.vocabulary.size());
}

Row merge_rows(const Row& a, const Row& b) {
    Row r;
    r.keys = a.keys;
    r.keys.insert(r.keys.end(), b.keys.begin(), b.keys.end());
    std::sort(r.keys.begin(), r.keys.end());
    r.columns = a.columns;
    r.columns.insert(b.columns.begin(), b.columns.end());
    r.token_length = a.token_length + b.token_length;
    return r;
}

std::vector<Row> cartesian(const std::vector<Row>& left, const std::vector<Row>& right) {
    std::vector<Row> out;
    out.reserve(left.size() * right.size());
    for (const auto& l : left) {
        for (const auto& r : right) out.push_back(merge_rows(l, r));
    }
    return out;
}

const std::string& cell(const Row& row, const std::string& column) {
    auto it = row.columns.find(column);
    if (it == row.columns.end()) throw InvalidInput("row has no column '" + column + "'");
    return it->second;
}

/// Exact execution of every node except those in `skip`; returns rows per node id.
std::map<std::string, std::vector<Row>> run_nodes(const LogicalPlan& plan, const Dataset& data,
                                                  const std::set<std::string>& skip) {
    std::map<std::string, std::vector<Row>> rows;
    for (const auto& id : plan.topological_order()) {
        if (skip.count(id)) continue;
        const LogicalOperator& n = plan.node(id);
        const auto inputs = plan.inputs_of(id);
        std::vector<Row> out;
        switch (n.kind) {
        case OperatorKind::scan:
            out = data.table(n.table).rows;
            break;
        case OperatorKind::relational_filter:
            for (const auto& r : rows.at(inputs[0])) {
                if (n.filter->matches(cell(r, n.filter->column))) out.push_back(r);
            }
            break;
        case OperatorKind::relational_join: {
            std::multimap<std::string, const Row*> index;
            for (const auto& r : rows.at(inputs[1])) index.emplace(cell(r, n.right_column), &r);
            for (const auto& l : rows.at(inputs[0])) {
                auto [b, e] = index.equal_range(cell(l, n.left_column));
                for (auto it = b; it != e; ++it) out.push_back(merge_rows(l, *it->second));
            }
            break;
        }
        case OperatorKind::cartesian_product:
            out = cartesian(rows.at(inputs[0]), rows.at(inputs[1]));
            break;
        case OperatorKind::semantic_filter: {
            const SyntheticTask& task = data.task(n.predicate_id);
            for (const auto& r : rows.at(inputs[0])) {
                if (gold_label(data, task, r)) out.push_back(r);
            }
            break;
        }
        case OperatorKind::semantic_map: {
            const SyntheticTask& task = data.task(n.predicate_id);
            out = rows.at(inputs[0]);
            for (auto& r : out) r.columns[n.output_column] = gold_value(data, task, r);
            break;
        }
        case OperatorKind::semantic_join: {
            const SyntheticTask& task = data.task(n.predicate_id);
            for (auto& r : cartesian(rows.at(inputs[0]), rows.at(inputs[1]))) {
                if (gold_label(data, task, r)) out.push_back(std::move(r));
            }
            break;
        }
        }
        rows[id] = std::move(out);
    }
    return rows;
}

std::vector<std::string> map_columns(const LogicalPlan& plan) {
    std::vector<std::string> cols;
    for (const auto& n : plan.nodes) {
        if (n.kind == OperatorKind::semantic_map) cols.push_back(n.output_column);
    }
    return cols;
}

ResultSet to_result_set(const std::vector<Row>& rows, const std::vector<std::string>& columns) {
    ResultSet out;
    for (const auto& r : rows) {
        auto& values = out[r.key()];
        for (const auto& c : columns) {
            auto it = r.columns.find(c);
            if (it != r.columns.end()) values[c] = it->second;
        }
    }
    return out;
}

CostProfile rung(std::string id, double size, double ratio, double base_footprint, double quality,
                 double degradation) {
    CostProfile p;
    p.id = std::move(id);
    p.model_size = size;
    p.compression_ratio = ratio;
    p.per_token_cost = 0.001;
    p.cache_footprint = base_footprint * (0.2 + 0.8 * (1.0 - ratio));
    p.memory_budget = 4000.0;
    p.quality = quality;
    p.degradation = degradation;
    return p;
}

// Workload construction -----------------------------------------------------

Table make_table(const std::string& name, std::size_t n, std::uint64_t seed) {
    static const char* const categories[] = {"landscape", "portrait", "still_life", "abstract"};
    Table t;
    t.name = name;
    t.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t h = mix({seed, fnv1a(name), i});
        Row r;
        r.keys = {{name, static_cast<std::uint32_t>(i)}};
        r.columns[name + ".year"] = std::to_string(2000 + static_cast<int>(h % 20));
        r.columns[name + ".category"] = categories[(h >> 8) % 4];
        r.token_length = 100 + static_cast<std::uint32_t>((h >> 16) % 201);
        t.rows.push_back(std::move(r));
    }
    return t;
}

struct PlanBuilder {
    LogicalPlan plan;

    std::string scan(const std::string& id, const std::string& table) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::scan;
        op.table = table;
        plan.nodes.push_back(op);
        return id;
    }
    std::string year_filter(const std::string& id, const std::string& input, const std::string& table, int year) {
        LogicalOperator op;
        op.id = id;
        op.kind = OperatorKind::relational_filter;
        op.filter = ColumnPredicate{table + ".year", CompareOp::ge, std::to_string(year)};
        plan.nodes.push_back(op);
        plan.edges.emplace_back(input, id);
        return id;
    }
    std::string semantic(const std::string& id, OperatorKind kind, const std::string& input,
                         const std::vector<std::string>& scope, const std::string& output = "") {
        LogicalOperator op;
        op.id = id;
        op.kind = kind;
        op.predicate_id = "p_" + id;
        op.output_column = output;
        op.scope = scope;
        plan.nodes.push_back(op);
        plan.edges.emplace_back(input, id);
        return id;
    }
    std::string binary(const std::string& id, OperatorKind kind, const std::string& left, const std::string& right,
                       const std::vector<std::string>& scope) {
        LogicalOperator op;
        op.id = id;
        op.kind = kind;
        if (is_semantic(kind)) op.predicate_id = "p_" + id;
        op.scope = scope;
        plan.nodes.push_back(op);
        plan.edges.emplace_back(left, id);
        plan.edges.emplace_back(right, id);
        return id;
    }
};

SyntheticTask filter_task(const std::string& id, const std::vector<std::string>& scope, double base_rate,
                          double difficulty) {
    SyntheticTask t;
    t.predicate_id = "p_" + id;
    t.kind = SemanticKind::filter;
    t.base_rate = base_rate;
    t.difficulty = difficulty;
    t.scope = scope;
    return t;
}

QueryInstance build_query(const std::string& family, std::uint64_t seed, const WorkloadOptions& options) {
    std::mt19937_64 rng(seed);
    const auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    QueryInstance q;
    q.family = family;
    q.seed = seed;
    Dataset& d = q.dataset;
    d.seed = seed;
    d.profiles = options.ladder;
    PlanBuilder b;
    const auto add = [&](SyntheticTask t) { d.tasks[t.predicate_id] = std::move(t); };
    // The year filter keeps about 80% of rows.
    const std::size_t base_rows = (options.rows * 5 + 3) / 4;

    if (family == "two_filters") {
        d.tables.push_back(make_table("T", base_rows, seed));
        auto s = b.scan("scan_t", "T");
        auto f1 = b.semantic("f1", OperatorKind::semantic_filter, s, {"T"});
        auto r = b.year_filter("recent", f1, "T", 2004);
        b.semantic("f2", OperatorKind::semantic_filter, r, {"T"});
        add(filter_task("f1", {"T"}, uniform(0.45, 0.8), uniform(2.5, 6.0)));
        add(filter_task("f2", {"T"}, uniform(0.45, 0.8), uniform(2.5, 6.0)));
    } else if (family == "three_filters") {
        d.tables.push_back(make_table("T", base_rows, seed));
        auto s = b.scan("scan_t", "T");
        auto f1 = b.semantic("f1", OperatorKind::semantic_filter, s, {"T"});
        auto r = b.year_filter("recent", f1, "T", 2004);
        auto f2 = b.semantic("f2", OperatorKind::semantic_filter, r, {"T"});
        b.semantic("f3", OperatorKind::semantic_filter, f2, {"T"});
        for (const char* id : {"f1", "f2", "f3"}) add(filter_task(id, {"T"}, uniform(0.6, 0.85), uniform(2.5, 6.0)));
    } else if (family == "filter_map") {
        d.tables.push_back(make_table("T", base_rows, seed));
        auto s = b.scan("scan_t", "T");
        auto f1 = b.semantic("f1", OperatorKind::semantic_filter, s, {"T"});
        auto r = b.year_filter("recent", f1, "T", 2004);
        b.semantic("m1", OperatorKind::semantic_map, r, {"T"}, "m1_value");
        add(filter_task("f1", {"T"}, uniform(0.45, 0.8), uniform(2.5, 6.0)));
        SyntheticTask m;
        m.predicate_id = "p_m1";
        m.kind = SemanticKind::map;
        m.difficulty = uniform(4.0, 7.0);
        m.scope = {"T"};
        const int vocab = 4 + static_cast<int>(rng() % 5);
        for (int i = 0; i < vocab; ++i) m.vocabulary.push_back("value_" + std::to_string(i));
        add(m);
    } else if (family == "easy_hard") {
        d.tables.push_back(make_table("T", base_rows, seed));
        auto s = b.scan("scan_t", "T");
        auto r = b.year_filter("recent", s, "T", 2004);
        auto fe = b.semantic("easy", OperatorKind::semantic_filter, r, {"T"});
        b.semantic("hard", OperatorKind::semantic_filter, fe, {"T"});
        // The easy filter passes most rows and is nearly separable; the hard one decides.
        add(filter_task("easy", {"T"}, uniform(0.85, 0.95), uniform(9.0, 11.0)));
        SyntheticTask hard = filter_task("hard", {"T"}, uniform(0.4, 0.6), uniform(4.0, 6.0));
        hard.correlated_with = "p_easy";
        hard.correlation_penalty = options.correlation_penalty;
        add(hard);
    } else if (family == "join") {
        const std::size_t left = 40;
        const std::size_t right = std::max<std::size_t>(1, options.rows / left);
        d.tables.push_back(make_table("A", left, seed));
        d.tables.push_back(make_table("B", right, seed));
        auto sa = b.scan("scan_a", "A");
        auto sb = b.scan("scan_b", "B");
        auto fa = b.semantic("fa", OperatorKind::semantic_filter, sa, {"A"});
        b.binary("sj", OperatorKind::semantic_join, fa, sb, {"A", "B"});
        add(filter_task("fa", {"A"}, uniform(0.5, 0.8), uniform(2.5, 6.0)));
        add(filter_task("sj", {"A", "B"}, uniform(0.25, 0.4), uniform(2.5, 6.0)));
    } else {
        throw InvalidInput("unknown workload family '" + family + "'");
    }
    q.plan = std::move(b.plan);
    q.plan.validate();
    return q;
}

double f1_against_gold(const OperatorProfile& op, std::size_t c) {
    const CandidateProfile& cp = op.candidates[c];
    if (op.kind == SemanticKind::map) {
        double hits = 0.0;
        for (std::size_t t = 0; t < cp.outputs.size(); ++t) hits += op.output_matches(c, t);
        return cp.outputs.empty() ? 0.0 : hits / static_cast<double>(cp.outputs.size());
    }
    // Single-threshold classifier at the score scale's natural midpoint.
    const double cut = cp.candidate.decision_kind == DecisionKind::direct_value ? 0.5 : 0.0;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t t = 0; t < cp.scores.size(); ++t) {
        const bool pred = cp.scores[t] > cut;
        const bool gold = op.gold_labels[t] != 0;
        tp += pred && gold;
        fp += pred && !gold;
        fn += !pred && gold;
    }
    return tp > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
}

void prune_dominated_candidates(OperatorProfile& op) {
    std::vector<double> quality;
    for (std::size_t c = 0; c < op.candidates.size(); ++c) quality.push_back(f1_against_gold(op, c));
    std::vector<CandidateProfile> kept;
    for (std::size_t c = 0; c < op.candidates.size(); ++c) {
        const auto& x = op.candidates[c].candidate;
        bool dominated = false;
        for (std::size_t d = 0; d < op.candidates.size() && !x.is_gold; ++d) {
            const auto& y = op.candidates[d].candidate;
            if (d == c || y.is_gold) continue;
            const bool no_worse = y.cost_per_tuple <= x.cost_per_tuple && quality[d] >= quality[c];
            const bool better = y.cost_per_tuple < x.cost_per_tuple || quality[d] > quality[c];
            if (no_worse && better) dominated = true;
        }
        if (!dominated) kept.push_back(std::move(op.candidates[c]));
    }
    op.candidates = std::move(kept);
}

} // namespace

std::string Row::key() const {
    std::string k;
    for (const auto& [table, id] : keys) {
        if (!k.empty()) k += '|';
        k += table + ':' + std::to_string(id);
    }
    return k;
}

std::string Row::key_over(const std::vector<std::string>& tables) const {
    if (tables.empty()) return key();
    std::string k;
    for (const auto& [table, id] : keys) {
        if (std::find(tables.begin(), tables.end(), table) == tables.end()) continue;
        if (!k.empty()) k += '|';
        k += table + ':' + std::to_string(id);
    }
    return k;
}

const char* to_string(ScoreStyle s) { return s == ScoreStyle::log_odds ? "log_odds" : "similarity"; }

ScoreStyle score_style_from_string(const std::string& name) {
    if (name == "log_odds") return ScoreStyle::log_odds;
    if (name == "similarity") return ScoreStyle::similarity;
    throw InvalidInput("unknown score style '" + name + "'");
}

void SyntheticTask::validate() const {
    if (predicate_id.empty()) throw InvalidInput("task lacks a predicate id");
    if (kind == SemanticKind::filter && !(base_rate > 0.0 && base_rate < 1.0)) {
        throw InvalidInput("task '" + predicate_id + "': base_rate must lie in (0,1)");
    }
    if (kind == SemanticKind::map && vocabulary.empty()) {
        throw InvalidInput("map task '" + predicate_id + "' has an empty vocabulary");
    }
    if (!(difficulty >= 0.0)) throw InvalidInput("task '" + predicate_id + "': difficulty must be nonnegative");
    if (!(correlation_penalty >= 0.0 && correlation_penalty <= 1.0)) {
        throw InvalidInput("task '" + predicate_id + "': correlation_penalty must lie in [0,1]");
    }
}

std::size_t CostProfile::capacity(double token_length) const {
    const double fits = std::floor(memory_budget / (cache_footprint * token_length));
    return fits < 1.0 ? 1 : static_cast<std::size_t>(fits);
}

double CostProfile::amortized_cost(double token_length) const {
    return per_token_cost * model_size * token_length / static_cast<double>(capacity(token_length));
}

void CostProfile::validate() const {
    if (id.empty()) throw InvalidInput("cost profile lacks an id");
    if (!(model_size > 0.0 && per_token_cost > 0.0 && cache_footprint > 0.0 && memory_budget > 0.0)) {
        throw InvalidInput("cost profile '" + id + "' needs positive size, cost, footprint and budget");
    }
    if (!(compression_ratio >= 0.0 && compression_ratio < 1.0)) {
        throw InvalidInput("cost profile '" + id + "': compression_ratio must lie in [0,1)");
    }
}

std::vector<CostProfile> default_ladder() {
    std::vector<CostProfile> ladder = {
        rung("s8-r0", 8.0, 0.0, 1.0, 0.55, 0.8),    rung("s8-r50", 8.0, 0.5, 1.0, 0.55, 0.8),
        rung("s8-r90", 8.0, 0.9, 1.0, 0.55, 0.8),   rung("l70-r50", 70.0, 0.5, 2.5, 1.0, 0.4),
        rung("l70-r90", 70.0, 0.9, 2.5, 1.0, 0.4),  rung("l70-r99", 70.0, 0.99, 2.5, 1.0, 0.4),
        rung("gold", 70.0, 0.0, 2.5, 1.0, 0.4),
    };
    ladder.back().is_gold = true;
    return ladder;
}

std::vector<CostProfile> uncompressed_ladder() {
    std::vector<CostProfile> out;
    for (auto& p : default_ladder()) {
        if (p.compression_ratio == 0.0) out.push_back(p);
    }
    return out;
}

double batch_cost(const CostProfile& profile, std::span<const std::uint32_t> token_lengths) {
    double total = 0.0;
    std::size_t count = 0;
    std::uint32_t longest = 0;
    for (std::uint32_t len : token_lengths) {
        const std::uint32_t widened = std::max(longest, len);
        if (count > 0 && count + 1 > profile.capacity(widened)) {
            total += profile.per_token_cost * longest * profile.model_size;
            count = 0;
            longest = 0;
        }
        ++count;
        longest = std::max(longest, len);
    }
    if (count > 0) total += profile.per_token_cost * longest * profile.model_size;
    return total;
}

const Table& Dataset::table(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return t;
    }
    throw InvalidInput("dataset has no table '" + name + "'");
}

const SyntheticTask& Dataset::task(const std::string& predicate_id) const {
    auto it = tasks.find(predicate_id);
    if (it == tasks.end()) throw InvalidInput("dataset has no task '" + predicate_id + "'");
    return it->second;
}

const CostProfile& Dataset::profile(const std::string& id) const {
    for (const auto& p : profiles) {
        if (p.id == id) return p;
    }
    throw InvalidInput("dataset has no cost profile '" + id + "'");
}

const CostProfile& Dataset::gold_profile() const {
    for (const auto& p : profiles) {
        if (p.is_gold) return p;
    }
    throw InvalidInput("dataset has no gold cost profile");
}

bool gold_label(const Dataset& data, const SyntheticTask& task, const Row& row) {
    const std::uint64_t h = mix({data.seed, fnv1a(task.predicate_id), fnv1a("label"), fnv1a(row.key_over(task.scope))});
    return unit(h) < task.base_rate;
}

std::string gold_value(const Dataset& data, const SyntheticTask& task, const Row& row) {
    return task.vocabulary[gold_index(data, task, row)];
}

double agreement(const SyntheticTask& task, const CostProfile& profile, bool correlated_positive) {
    if (profile.is_gold) return 1.0;
    const double sep = task.difficulty * profile.separation_factor() *
                       (correlated_positive ? 1.0 - task.correlation_penalty : 1.0);
    return normal_cdf(sep / 2.0);
}

double candidate_score(const Dataset& data, const SyntheticTask& task, const CostProfile& profile, const Row& row) {
    const bool label = gold_label(data, task, row);
    if (profile.is_gold) return label ? 1.0 : 0.0;
    const double sep = task_separation(data, task, profile, row);
    const std::uint64_t h =
        mix({data.seed, fnv1a(task.predicate_id), fnv1a(profile.id), fnv1a("score"), fnv1a(row.key())});
    const double log_odds = (label ? sep : -sep) / 2.0 + standard_normal(h);
    return profile.style == ScoreStyle::log_odds ? log_odds : 0.3 + 0.08 * log_odds;
}

std::string candidate_value(const Dataset& data, const SyntheticTask& task, const CostProfile& profile,
                            const Row& row) {
    const std::size_t g = gold_index(data, task, row);
    const std::size_t v = task.vocabulary.size();
    if (profile.is_gold || v == 1) return task.vocabulary[g];
    const double q = normal_cdf(task_separation(data, task, profile, row) / 2.0);
    const std::uint64_t h =
        mix({data.seed, fnv1a(task.predicate_id), fnv1a(profile.id), fnv1a("value"), fnv1a(row.key())});
    if (unit(h) < q) return task.vocabulary[g];
    return task.vocabulary[(g + 1 + splitmix64(h) % (v - 1)) % v];
}

const std::vector<std::string>& workload_families() {
    static const std::vector<std::string> families = {"two_filters", "three_filters", "filter_map", "easy_hard",
                                                      "join"};
    return families;
}

QueryInstance generate_query(const std::string& family, std::uint64_t seed, const WorkloadOptions& options,
                             const std::string& query_id) {
    for (auto& p : options.ladder) p.validate();
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        QueryInstance q = build_query(family, attempt == 0 ? seed : mix({seed, attempt}), options);
        q.query_id = query_id;
        for (const auto& [id, t] : q.dataset.tasks) t.validate();
        if (!execute_gold(q.plan, q.dataset).empty()) return q;
    }
    throw InvalidInput("could not generate a query with a nonempty gold result for family '" + family + "'");
}

std::vector<QueryInstance> generate_workload(std::size_t count, std::uint64_t seed,
                                             const std::vector<std::string>& families,
                                             const WorkloadOptions& options) {
    const auto& fams = families.empty() ? workload_families() : families;
    std::vector<QueryInstance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_query(fams[i % fams.size()], mix({seed, i}), options, "q" + std::to_string(i)));
    }
    return out;
}

ResultSet execute_gold(const LogicalPlan& plan, const Dataset& data) {
    plan.validate();
    auto rows = run_nodes(plan, data, {});
    return to_result_set(rows.at(plan.sink()), map_columns(plan));
}

PreparedQuery prepare_query(const LogicalPlan& plan, const Dataset& data) {
    PreparedQuery q;
    q.plan = pull_up_semantic(rewrite_semantic_join(plan));
    q.pipeline = q.plan.semantic_pipeline();
    const std::set<std::string> skip(q.pipeline.begin(), q.pipeline.end());
    auto rows = run_nodes(q.plan, data, skip);
    const std::string feed = q.pipeline.empty() ? q.plan.sink() : q.plan.inputs_of(q.pipeline.front()).front();
    q.input = std::move(rows.at(feed));
    return q;
}

std::vector<PhysicalCandidate> candidate_catalog(const LogicalOperator& op, const Dataset& data,
                                                 std::span<const std::uint32_t> token_lengths) {
    std::vector<PhysicalCandidate> out;
    for (const auto& p : data.profiles) {
        PhysicalCandidate c;
        c.id = op.id + "@" + p.id;
        c.implements = op.id;
        c.profile = p.id;
        c.is_gold = p.is_gold;
        c.decision_kind = op.kind == OperatorKind::semantic_filter && !p.is_gold ? DecisionKind::two_threshold_score
                                                                                 : DecisionKind::direct_value;
        double total = 0.0;
        for (std::uint32_t len : token_lengths) total += p.amortized_cost(len);
        c.cost_per_tuple = token_lengths.empty() ? 0.0 : total / static_cast<double>(token_lengths.size());
        out.push_back(std::move(c));
    }
    return out;
}

ProfileMatrix profile_query(const PreparedQuery& query, const Dataset& data, const ProfileOptions& options) {
    if (!(options.sample_fraction > 0.0 && options.sample_fraction <= 1.0)) {
        throw InvalidInput("sample fraction must lie in (0,1]");
    }
    const std::size_t n = query.input.size();
    if (n == 0) throw InvalidInput("the semantic pipeline receives no tuples");
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(options.sample_fraction * static_cast<double>(n))), 1, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(mix({options.seed, data.seed, fnv1a("sample")}));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    ProfileMatrix pm;
    pm.population_size = n;
    pm.sample_fraction = options.sample_fraction;
    for (std::size_t i : idx) {
        pm.tuple_keys.push_back(query.input[i].key());
        pm.token_lengths.push_back(query.input[i].token_length);
    }
    for (const auto& id : query.pipeline) {
        const LogicalOperator& lop = query.plan.node(id);
        const SyntheticTask& task = data.task(lop.predicate_id);
        OperatorProfile op;
        op.operator_id = id;
        op.kind = lop.kind == OperatorKind::semantic_map ? SemanticKind::map : SemanticKind::filter;
        for (std::size_t i : idx) {
            const Row& row = query.input[i];
            if (op.kind == SemanticKind::filter) {
                op.gold_labels.push_back(gold_label(data, task, row) ? 1 : 0);
            } else {
                op.gold_values.push_back(gold_value(data, task, row));
            }
        }
        for (auto& cand : candidate_catalog(lop, data, pm.token_lengths)) {
            const CostProfile& prof = data.profile(cand.profile);
            CandidateProfile cp;
            cp.candidate = std::move(cand);
            for (std::size_t i : idx) {
                const Row& row = query.input[i];
                if (op.kind == SemanticKind::filter) {
                    cp.scores.push_back(candidate_score(data, task, prof, row));
                } else {
                    cp.outputs.push_back(candidate_value(data, task, prof, row));
                }
                cp.runtimes.push_back(prof.amortized_cost(row.token_length));
            }
            op.candidates.push_back(std::move(cp));
        }
        if (options.prune_dominated) prune_dominated_candidates(op);
        pm.operators.push_back(std::move(op));
    }
    pm.finalize();
    return pm;
}

ExecutionResult execute_plan(const PreparedQuery& query, const Dataset& data, const OptimizedPlan& plan) {
    const std::size_t n = query.input.size();
    const std::size_t m = plan.operators.size();
    if (m != query.pipeline.size()) throw InvalidInput("plan does not cover the semantic pipeline");

    enum : std::uint8_t { unsure = 0, accepted = 1, rejected = 2 };
    std::vector<std::vector<std::uint8_t>> state(m, std::vector<std::uint8_t>(n, unsure));
    std::vector<std::vector<std::string>> values(m);
    std::vector<std::uint8_t> dropped(n, 0);
    std::vector<const LogicalOperator*> lops;
    for (std::size_t o = 0; o < m; ++o) {
        if (plan.operators[o].operator_id != query.pipeline[o]) {
            throw InvalidInput("plan operator '" + plan.operators[o].operator_id + "' is out of pipeline order");
        }
        lops.push_back(&query.plan.node(query.pipeline[o]));
        if (plan.operators[o].kind == SemanticKind::map) values[o].resize(n);
    }

    std::vector<ExecutionStep> order = plan.execution_order;
    if (order.empty()) {
        for (std::size_t o = 0; o < m; ++o) {
            for (std::size_t i = 0; i < plan.operators[o].cascade.size(); ++i) order.push_back({o, i});
        }
    }

    ExecutionResult result;
    for (const auto& step : order) {
        const StageChoice& stage = plan.operators.at(step.op).cascade.at(step.stage);
        const SyntheticTask& task = data.task(lops[step.op]->predicate_id);
        const CostProfile& prof = data.profile(stage.profile);
        StageExecution ex;
        ex.op = step.op;
        ex.stage = step.stage;
        ex.candidate_id = stage.candidate_id;
        std::vector<std::uint32_t> lengths;
        for (std::size_t t = 0; t < n; ++t) {
            if (dropped[t] || state[step.op][t] != unsure) continue;
            const Row& row = query.input[t];
            lengths.push_back(row.token_length);
            ++ex.processed;
            if (plan.operators[step.op].kind == SemanticKind::map) {
                values[step.op][t] = candidate_value(data, task, prof, row);
                state[step.op][t] = accepted;
                ++ex.accepted;
                continue;
            }
            std::uint8_t outcome = unsure;
            if (stage.is_gold) {
                outcome = gold_label(data, task, row) ? accepted : rejected;
            } else {
                const double s = candidate_score(data, task, prof, row);
                if (stage.decision_kind == DecisionKind::direct_value) {
                    outcome = s > 0.5 ? accepted : rejected;
                } else if (s > stage.theta_hi) {
                    outcome = accepted;
                } else if (s < stage.theta_lo) {
                    outcome = rejected;
                }
            }
            state[step.op][t] = outcome;
            if (outcome == accepted) ++ex.accepted;
            if (outcome == rejected) {
                ++ex.rejected;
                dropped[t] = 1;
            }
            if (outcome == unsure) ++ex.unsure;
        }
        ex.cost = batch_cost(prof, lengths);
        result.cost += ex.cost;
        result.stages.push_back(std::move(ex));
    }

    const auto columns = map_columns(query.plan);
    for (std::size_t t = 0; t < n; ++t) {
        if (dropped[t]) continue;
        for (std::size_t o = 0; o < m; ++o) {
            if (state[o][t] == unsure) {
                throw InvalidInput("operator '" + plan.operators[o].operator_id +
                                   "' left tuples undecided; its cascade must end with the gold candidate");
            }
        }
        const Row& row = query.input[t];
        auto& out = result.results[row.key()];
        for (const auto& c : columns) {
            auto it = row.columns.find(c);
            if (it != row.columns.end()) out[c] = it->second;
        }
        for (std::size_t o = 0; o < m; ++o) {
            if (plan.operators[o].kind == SemanticKind::map) out[lops[o]->output_column] = values[o][t];
        }
    }
    return result;
}

QualityReport compare_results(const ResultSet& result, const ResultSet& gold, const QualityTargets& targets) {
    QualityReport r;
    r.result_size = result.size();
    r.gold_size = gold.size();
    std::size_t tp = 0;
    for (const auto& [key, values] : result) {
        auto it = gold.find(key);
        if (it == gold.end() || it->second.size() != values.size()) continue;
        bool same = true;
        for (const auto& [col, v] : it->second) {
            auto jt = values.find(col);
            if (jt == values.end() || !values_equal(jt->second, v)) {
                same = false;
                break;
            }
        }
        tp += same;
    }
    r.recall = gold.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(gold.size());
    r.precision = result.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(result.size());
    const auto met = [](double achieved, double target) {
        return target > 0.0 ? achieved / target : std::numeric_limits<double>::infinity();
    };
    r.target_met_recall = met(r.recall, targets.recall);
    r.target_met_precision = met(r.precision, targets.precision);
    return r;
}

QualityReport verify_on_holdout(const OptimizedPlan& plan, const QueryInstance& query,
                                const PreparedQuery& prepared) {
    const ResultSet gold = execute_gold(query.plan, query.dataset);
    const ExecutionResult run = execute_plan(prepared, query.dataset, plan);
    QualityReport r = compare_results(run.results, gold, plan.targets);
    r.cost = run.cost;
    return r;
}

} // namespace semopt
