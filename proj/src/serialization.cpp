#include "semopt/serialization.hpp"

#include "semopt/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace semopt {

namespace {

/// Runs a reader, turning JSON library errors into InvalidInput.
template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("malformed ") + what + ": " + e.what());
    }
}

/// Non-finite values travel as strings since JSON has no literal for them.
Json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

double get_number(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw InvalidInput("expected a number, got " + j.dump());
}

double get_number(const Json& j, const char* key, double fallback) {
    return j.contains(key) ? get_number(j.at(key)) : fallback;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* what) {
    if (!j.is_object()) throw InvalidInput(std::string(what) + " must be a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw InvalidInput(std::string("unknown key '") + key + "' in " + what);
    }
}

Json parse_line(const std::string& line, const char* what) {
    try {
        return Json::parse(line);
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("malformed ") + what + " line: " + e.what());
    }
}

Json header_line(std::istream& in, const char* type) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput(std::string("empty ") + type + " file");
    Json h = parse_line(line, type);
    if (!h.is_object() || h.value("type", "") != type) {
        throw InvalidInput(std::string("missing ") + type + " header line");
    }
    return h;
}

Json to_json(const CostProfile& p) {
    return {{"id", p.id},
            {"model_size", p.model_size},
            {"ratio", p.compression_ratio},
            {"per_token_cost", p.per_token_cost},
            {"footprint", p.cache_footprint},
            {"memory_budget", p.memory_budget},
            {"quality", p.quality},
            {"degradation", p.degradation},
            {"style", to_string(p.style)},
            {"is_gold", p.is_gold}};
}

CostProfile cost_profile_from_json(const Json& j) {
    reject_unknown(j,
                   {"id", "model_size", "ratio", "per_token_cost", "footprint", "memory_budget", "quality",
                    "degradation", "style", "is_gold"},
                   "cost profile");
    CostProfile p;
    p.id = j.at("id").get<std::string>();
    p.model_size = j.at("model_size").get<double>();
    p.compression_ratio = j.at("ratio").get<double>();
    p.per_token_cost = j.at("per_token_cost").get<double>();
    p.cache_footprint = j.at("footprint").get<double>();
    p.memory_budget = get_or(j, "memory_budget", p.memory_budget);
    p.quality = get_or(j, "quality", p.quality);
    p.degradation = get_or(j, "degradation", p.degradation);
    if (j.contains("style")) p.style = score_style_from_string(j.at("style").get<std::string>());
    p.is_gold = get_or(j, "is_gold", false);
    p.validate();
    return p;
}

Json to_json(const SyntheticTask& t) {
    Json j = {{"predicate_id", t.predicate_id},
              {"kind", to_string(t.kind)},
              {"base_rate", t.base_rate},
              {"difficulty", t.difficulty},
              {"scope", t.scope}};
    if (!t.vocabulary.empty()) j["vocabulary"] = t.vocabulary;
    if (!t.correlated_with.empty()) {
        j["correlated_with"] = t.correlated_with;
        j["correlation_penalty"] = t.correlation_penalty;
    }
    return j;
}

SyntheticTask task_from_json(const Json& j) {
    SyntheticTask t;
    t.predicate_id = j.at("predicate_id").get<std::string>();
    t.kind = semantic_kind_from_string(j.at("kind").get<std::string>());
    t.base_rate = j.at("base_rate").get<double>();
    t.difficulty = j.at("difficulty").get<double>();
    t.scope = get_or(j, "scope", std::vector<std::string>{});
    t.vocabulary = get_or(j, "vocabulary", std::vector<std::string>{});
    t.correlated_with = get_or(j, "correlated_with", std::string{});
    t.correlation_penalty = get_or(j, "correlation_penalty", 0.0);
    t.validate();
    return t;
}

Json to_json(const StageChoice& s) {
    return {{"candidate_id", s.candidate_id},
            {"profile", s.profile},
            {"decision_kind", to_string(s.decision_kind)},
            {"theta_lo", number(s.theta_lo)},
            {"theta_hi", number(s.theta_hi)},
            {"cost_per_tuple", s.cost_per_tuple},
            {"is_gold", s.is_gold}};
}

StageChoice stage_from_json(const Json& j) {
    StageChoice s;
    s.candidate_id = j.at("candidate_id").get<std::string>();
    s.profile = get_or(j, "profile", std::string{});
    s.decision_kind = decision_kind_from_string(j.at("decision_kind").get<std::string>());
    s.theta_lo = get_number(j.at("theta_lo"));
    s.theta_hi = get_number(j.at("theta_hi"));
    s.cost_per_tuple = j.at("cost_per_tuple").get<double>();
    s.is_gold = get_or(j, "is_gold", false);
    if (s.theta_lo > s.theta_hi) throw InvalidInput("stage " + s.candidate_id + " has theta_lo above theta_hi");
    return s;
}

} // namespace

Json to_json(const QualityTargets& t) {
    return {{"recall", t.recall},
            {"precision", t.precision},
            {"alpha_recall", t.alpha_recall},
            {"alpha_precision", t.alpha_precision}};
}

QualityTargets targets_from_json(const Json& j) {
    return guarded("targets", [&] {
        reject_unknown(j, {"recall", "precision", "alpha_recall", "alpha_precision"}, "targets");
        QualityTargets t;
        t.recall = get_or(j, "recall", t.recall);
        t.precision = get_or(j, "precision", t.precision);
        t.alpha_recall = get_or(j, "alpha_recall", t.alpha_recall);
        t.alpha_precision = get_or(j, "alpha_precision", t.alpha_precision);
        t.validate();
        return t;
    });
}

Json to_json(const LogicalPlan& plan) {
    Json nodes = Json::array();
    for (const auto& n : plan.nodes) {
        Json j = {{"id", n.id}, {"kind", to_string(n.kind)}};
        if (!n.predicate_id.empty()) j["predicate_id"] = n.predicate_id;
        if (!n.output_column.empty()) j["output_column"] = n.output_column;
        if (!n.table.empty()) j["table"] = n.table;
        if (n.filter) {
            j["filter"] = {{"column", n.filter->column}, {"op", to_string(n.filter->op)}, {"value", n.filter->value}};
        }
        if (!n.left_column.empty()) j["left_column"] = n.left_column;
        if (!n.right_column.empty()) j["right_column"] = n.right_column;
        if (!n.reads.empty()) j["reads"] = n.reads;
        if (!n.scope.empty()) j["scope"] = n.scope;
        nodes.push_back(std::move(j));
    }
    Json edges = Json::array();
    for (const auto& [a, b] : plan.edges) edges.push_back({a, b});
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"targets", to_json(plan.targets)}};
}

LogicalPlan plan_from_json(const Json& j) {
    return guarded("plan", [&] {
        reject_unknown(j, {"nodes", "edges", "targets"}, "plan");
        LogicalPlan plan;
        for (const auto& n : j.at("nodes")) {
            reject_unknown(n,
                           {"id", "kind", "predicate_id", "output_column", "table", "filter", "left_column",
                            "right_column", "reads", "scope"},
                           "plan node");
            LogicalOperator op;
            op.id = n.at("id").get<std::string>();
            op.kind = operator_kind_from_string(n.at("kind").get<std::string>());
            op.predicate_id = get_or(n, "predicate_id", std::string{});
            op.output_column = get_or(n, "output_column", std::string{});
            op.table = get_or(n, "table", std::string{});
            if (n.contains("filter")) {
                const Json& f = n.at("filter");
                op.filter = ColumnPredicate{f.at("column").get<std::string>(),
                                            compare_op_from_string(f.at("op").get<std::string>()),
                                            f.at("value").get<std::string>()};
            }
            op.left_column = get_or(n, "left_column", std::string{});
            op.right_column = get_or(n, "right_column", std::string{});
            op.reads = get_or(n, "reads", std::vector<std::string>{});
            op.scope = get_or(n, "scope", std::vector<std::string>{});
            plan.nodes.push_back(std::move(op));
        }
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw InvalidInput("plan edge must be [parent, child]");
            plan.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
        if (j.contains("targets")) plan.targets = targets_from_json(j.at("targets"));
        plan.validate();
        return plan;
    });
}

Json to_json(const OptimizedPlan& plan) {
    Json ops = Json::array();
    for (const auto& op : plan.operators) {
        Json cascade = Json::array();
        for (const auto& s : op.cascade) cascade.push_back(to_json(s));
        ops.push_back({{"operator_id", op.operator_id}, {"kind", to_string(op.kind)}, {"cascade", std::move(cascade)}});
    }
    Json order = Json::array();
    for (const auto& step : plan.execution_order) order.push_back({step.op, step.stage});
    Json j = {{"status", to_string(plan.status)},
              {"variant", to_string(plan.variant)},
              {"targets", to_json(plan.targets)},
              {"predicted_cost", plan.predicted_cost},
              {"predicted_recall_bound", plan.predicted_recall_bound},
              {"predicted_precision_bound", plan.predicted_precision_bound},
              {"repaired", plan.repaired},
              {"failed_iterations", plan.failed_iterations},
              {"operators", std::move(ops)},
              {"execution_order", std::move(order)}};
    if (!plan.loss_trace.empty()) j["loss_trace"] = plan.loss_trace;
    return j;
}

OptimizedPlan optimized_plan_from_json(const Json& j) {
    return guarded("optimized plan", [&] {
        OptimizedPlan plan;
        plan.status = plan_status_from_string(j.at("status").get<std::string>());
        plan.variant = variant_from_string(get_or(j, "variant", std::string("global")));
        if (j.contains("targets")) plan.targets = targets_from_json(j.at("targets"));
        plan.predicted_cost = get_or(j, "predicted_cost", 0.0);
        plan.predicted_recall_bound = get_or(j, "predicted_recall_bound", 0.0);
        plan.predicted_precision_bound = get_or(j, "predicted_precision_bound", 0.0);
        plan.repaired = get_or(j, "repaired", false);
        plan.failed_iterations = get_or(j, "failed_iterations", 0);
        for (const auto& o : j.at("operators")) {
            OperatorPlan op;
            op.operator_id = o.at("operator_id").get<std::string>();
            op.kind = semantic_kind_from_string(o.at("kind").get<std::string>());
            for (const auto& s : o.at("cascade")) op.cascade.push_back(stage_from_json(s));
            if (op.cascade.empty()) throw InvalidInput("operator " + op.operator_id + " has an empty cascade");
            plan.operators.push_back(std::move(op));
        }
        for (const auto& step : get_or(j, "execution_order", Json::array())) {
            const ExecutionStep s{step.at(0).get<std::size_t>(), step.at(1).get<std::size_t>()};
            if (s.op >= plan.operators.size() || s.stage >= plan.operators[s.op].cascade.size()) {
                throw InvalidInput("execution_order refers to a missing stage");
            }
            plan.execution_order.push_back(s);
        }
        plan.loss_trace = get_or(j, "loss_trace", std::vector<double>{});
        return plan;
    });
}

Json catalog_to_json(const std::vector<CostProfile>& profiles) {
    Json list = Json::array();
    for (const auto& p : profiles) list.push_back(to_json(p));
    return {{"profiles", std::move(list)}};
}

std::vector<CostProfile> catalog_from_json(const Json& j) {
    return guarded("profile catalog", [&] {
        const Json& list = j.is_array() ? j : j.at("profiles");
        std::vector<CostProfile> out;
        std::size_t gold = 0;
        for (const auto& p : list) {
            out.push_back(cost_profile_from_json(p));
            gold += out.back().is_gold;
        }
        if (gold != 1) throw InvalidInput("profile catalog needs exactly one gold profile");
        return out;
    });
}

void write_dataset(std::ostream& out, const Dataset& data) {
    Json tasks = Json::array();
    for (const auto& [id, t] : data.tasks) tasks.push_back(to_json(t));
    Json tables = Json::array();
    for (const auto& t : data.tables) tables.push_back(t.name);
    const Json header = {{"type", "dataset"},
                         {"seed", data.seed},
                         {"tables", std::move(tables)},
                         {"tasks", std::move(tasks)},
                         {"profiles", catalog_to_json(data.profiles).at("profiles")}};
    out << header.dump() << '\n';
    for (const auto& t : data.tables) {
        for (const auto& r : t.rows) {
            const Json row = {{"table", t.name}, {"keys", r.keys}, {"columns", r.columns},
                              {"token_length", r.token_length}};
            out << row.dump() << '\n';
        }
    }
}

Dataset read_dataset(std::istream& in) {
    return guarded("dataset", [&] {
        const Json h = header_line(in, "dataset");
        Dataset data;
        data.seed = h.at("seed").get<std::uint64_t>();
        for (const auto& name : h.at("tables")) data.tables.push_back({name.get<std::string>(), {}});
        for (const auto& t : h.at("tasks")) {
            SyntheticTask task = task_from_json(t);
            const std::string id = task.predicate_id;
            data.tasks.emplace(id, std::move(task));
        }
        data.profiles = catalog_from_json(h.at("profiles"));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const Json j = parse_line(line, "dataset");
            Row r;
            r.keys = j.at("keys").get<decltype(r.keys)>();
            r.columns = j.at("columns").get<decltype(r.columns)>();
            r.token_length = j.at("token_length").get<std::uint32_t>();
            const std::string table = j.at("table").get<std::string>();
            bool placed = false;
            for (auto& t : data.tables) {
                if (t.name == table) {
                    t.rows.push_back(std::move(r));
                    placed = true;
                    break;
                }
            }
            if (!placed) throw InvalidInput("row of undeclared table " + table);
        }
        return data;
    });
}

void write_profile(std::ostream& out, const ProfileMatrix& profile) {
    Json ops = Json::array();
    for (const auto& op : profile.operators) {
        Json cands = Json::array();
        for (const auto& c : op.candidates) {
            cands.push_back({{"id", c.candidate.id},
                             {"implements", c.candidate.implements},
                             {"profile", c.candidate.profile},
                             {"decision_kind", to_string(c.candidate.decision_kind)},
                             {"cost_per_tuple", c.candidate.cost_per_tuple},
                             {"is_gold", c.candidate.is_gold}});
        }
        ops.push_back({{"operator_id", op.operator_id}, {"kind", to_string(op.kind)}, {"candidates", std::move(cands)}});
    }
    const Json header = {{"type", "profile_matrix"},
                         {"population_size", profile.population_size},
                         {"sample_fraction", profile.sample_fraction},
                         {"operators", std::move(ops)}};
    out << header.dump() << '\n';
    for (std::size_t t = 0; t < profile.size(); ++t) {
        Json cells = Json::array();
        for (const auto& op : profile.operators) {
            Json cell;
            Json runtimes = Json::array();
            for (const auto& c : op.candidates) runtimes.push_back(c.runtimes[t]);
            if (op.kind == SemanticKind::filter) {
                Json scores = Json::array();
                for (const auto& c : op.candidates) scores.push_back(c.scores[t]);
                cell = {{"gold_label", op.gold_labels[t] != 0}, {"scores", std::move(scores)}};
            } else {
                Json outputs = Json::array();
                for (const auto& c : op.candidates) outputs.push_back(c.outputs[t]);
                cell = {{"gold_value", op.gold_values[t]}, {"outputs", std::move(outputs)}};
            }
            cell["runtimes"] = std::move(runtimes);
            cells.push_back(std::move(cell));
        }
        const Json line = {{"key", profile.tuple_keys[t]},
                           {"token_length", profile.token_lengths[t]},
                           {"operators", std::move(cells)}};
        out << line.dump() << '\n';
    }
}

ProfileMatrix read_profile(std::istream& in) {
    return guarded("profile matrix", [&] {
        const Json h = header_line(in, "profile_matrix");
        ProfileMatrix pm;
        pm.population_size = h.at("population_size").get<std::size_t>();
        pm.sample_fraction = h.at("sample_fraction").get<double>();
        for (const auto& o : h.at("operators")) {
            OperatorProfile op;
            op.operator_id = o.at("operator_id").get<std::string>();
            op.kind = semantic_kind_from_string(o.at("kind").get<std::string>());
            for (const auto& c : o.at("candidates")) {
                CandidateProfile cp;
                cp.candidate.id = c.at("id").get<std::string>();
                cp.candidate.implements = c.at("implements").get<std::string>();
                cp.candidate.profile = get_or(c, "profile", std::string{});
                cp.candidate.decision_kind = decision_kind_from_string(c.at("decision_kind").get<std::string>());
                cp.candidate.cost_per_tuple = c.at("cost_per_tuple").get<double>();
                cp.candidate.is_gold = get_or(c, "is_gold", false);
                op.candidates.push_back(std::move(cp));
            }
            pm.operators.push_back(std::move(op));
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const Json j = parse_line(line, "profile matrix");
            pm.tuple_keys.push_back(j.at("key").get<std::string>());
            pm.token_lengths.push_back(j.at("token_length").get<std::uint32_t>());
            const Json& cells = j.at("operators");
            if (cells.size() != pm.operators.size()) throw InvalidInput("profile line has the wrong operator count");
            for (std::size_t o = 0; o < pm.operators.size(); ++o) {
                OperatorProfile& op = pm.operators[o];
                const Json& cell = cells[o];
                const Json& runtimes = cell.at("runtimes");
                const Json& values = cell.at(op.kind == SemanticKind::filter ? "scores" : "outputs");
                if (runtimes.size() != op.candidates.size() || values.size() != op.candidates.size()) {
                    throw InvalidInput("profile cell of " + op.operator_id + " is incomplete");
                }
                for (std::size_t c = 0; c < op.candidates.size(); ++c) {
                    op.candidates[c].runtimes.push_back(runtimes[c].get<double>());
                    if (op.kind == SemanticKind::filter) {
                        op.candidates[c].scores.push_back(values[c].get<double>());
                    } else {
                        op.candidates[c].outputs.push_back(values[c].get<std::string>());
                    }
                }
                if (op.kind == SemanticKind::filter) {
                    op.gold_labels.push_back(cell.at("gold_label").get<bool>() ? 1 : 0);
                } else {
                    op.gold_values.push_back(cell.at("gold_value").get<std::string>());
                }
            }
        }
        pm.finalize();
        return pm;
    });
}

void write_query(const std::filesystem::path& dir, const QueryInstance& query) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "plan.json", to_json(query.plan).dump(2) + "\n");
    const Json meta = {{"query_id", query.query_id}, {"family", query.family}, {"seed", query.seed}};
    write_text_file(dir / "query.json", meta.dump(2) + "\n");
    std::ostringstream data;
    write_dataset(data, query.dataset);
    write_text_file(dir / "dataset.ndjson", data.str());
}

QueryInstance read_query(const std::filesystem::path& dir) {
    QueryInstance q;
    const Json meta = read_json_file(dir / "query.json");
    guarded("query", [&] {
        q.query_id = meta.at("query_id").get<std::string>();
        q.family = meta.at("family").get<std::string>();
        q.seed = meta.at("seed").get<std::uint64_t>();
        return 0;
    });
    q.plan = plan_from_json(read_json_file(dir / "plan.json"));
    std::ifstream in(dir / "dataset.ndjson");
    if (!in) throw InvalidInput("cannot open " + (dir / "dataset.ndjson").string());
    q.dataset = read_dataset(in);
    return q;
}

Json to_json(const OptimizerSettings& s) {
    return {{"learning_rate", s.learning_rate},
            {"adam_beta1", s.adam_beta1},
            {"adam_beta2", s.adam_beta2},
            {"adam_epsilon", s.adam_epsilon},
            {"beta_weight", s.beta_weight},
            {"iterations", s.iterations},
            {"tau_start", s.tau_start},
            {"tau_end", s.tau_end},
            {"seed", s.seed},
            {"pick_bound", s.pick_bound},
            {"settle_fraction", s.settle_fraction},
            {"threshold_bound", s.threshold_bound},
            {"repair_step", s.repair_step},
            {"repair_rounds", s.repair_rounds},
            {"polish_rounds", s.polish_rounds},
            {"polish_keep_bounds", s.polish_keep_bounds},
            {"keep_trace", s.keep_trace}};
}

OptimizerSettings optimizer_settings_from_json(const Json& j, const OptimizerSettings& base) {
    return guarded("optimizer settings", [&] {
        reject_unknown(j,
                       {"learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon", "beta_weight", "iterations",
                        "tau_start", "tau_end", "seed", "pick_bound", "settle_fraction", "threshold_bound", "repair_step", "repair_rounds", "polish_rounds",
                        "polish_keep_bounds", "keep_trace"},
                       "optimizer settings");
        OptimizerSettings s = base;
        s.learning_rate = get_or(j, "learning_rate", s.learning_rate);
        s.adam_beta1 = get_or(j, "adam_beta1", s.adam_beta1);
        s.adam_beta2 = get_or(j, "adam_beta2", s.adam_beta2);
        s.adam_epsilon = get_or(j, "adam_epsilon", s.adam_epsilon);
        s.beta_weight = get_or(j, "beta_weight", s.beta_weight);
        s.iterations = get_or(j, "iterations", s.iterations);
        s.tau_start = get_or(j, "tau_start", s.tau_start);
        s.tau_end = get_or(j, "tau_end", s.tau_end);
        s.seed = get_or(j, "seed", s.seed);
        s.pick_bound = get_or(j, "pick_bound", s.pick_bound);
        s.settle_fraction = get_or(j, "settle_fraction", s.settle_fraction);
        s.threshold_bound = get_or(j, "threshold_bound", s.threshold_bound);
        s.repair_step = get_or(j, "repair_step", s.repair_step);
        s.repair_rounds = get_or(j, "repair_rounds", s.repair_rounds);
        s.polish_rounds = get_or(j, "polish_rounds", s.polish_rounds);
        s.polish_keep_bounds = get_or(j, "polish_keep_bounds", s.polish_keep_bounds);
        s.keep_trace = get_or(j, "keep_trace", s.keep_trace);
        s.validate();
        return s;
    });
}

BenchOptions bench_options_from_json(const Json& j, const BenchOptions& base) {
    return guarded("config", [&] {
        reject_unknown(j,
                       {"seed", "queries", "jobs", "sample_fraction", "alpha", "targets", "variant", "families",
                        "rows", "correlation_penalty", "ladder", "optimizer"},
                       "config");
        BenchOptions o = base;
        o.seed = get_or(j, "seed", o.seed);
        o.queries = get_or(j, "queries", o.queries);
        o.jobs = get_or(j, "jobs", o.jobs);
        o.sample_fraction = get_or(j, "sample_fraction", o.sample_fraction);
        if (j.contains("variant")) o.variant = variant_from_string(j.at("variant").get<std::string>());
        o.families = get_or(j, "families", o.families);
        o.workload.rows = get_or(j, "rows", o.workload.rows);
        o.workload.correlation_penalty = get_or(j, "correlation_penalty", o.workload.correlation_penalty);
        if (j.contains("ladder")) {
            const Json& l = j.at("ladder");
            if (l.is_string()) {
                const auto name = l.get<std::string>();
                if (name == "default") {
                    o.workload.ladder = default_ladder();
                } else if (name == "uncompressed") {
                    o.workload.ladder = uncompressed_ladder();
                } else {
                    throw InvalidInput("unknown ladder '" + name + "'");
                }
            } else {
                o.workload.ladder = catalog_from_json(l);
            }
        }
        const double alpha = get_or(j, "alpha", o.targets.empty() ? 0.95 : o.targets.front().alpha_recall);
        if (j.contains("targets")) {
            o.targets.clear();
            for (const auto& t : j.at("targets")) {
                if (!t.is_array() || t.size() != 2) throw InvalidInput("each target must be [recall, precision]");
                o.targets.push_back({t[0].get<double>(), t[1].get<double>(), alpha, alpha});
            }
        } else if (o.targets.empty()) {
            o.targets = BenchOptions::default_targets(alpha);
        }
        for (auto& t : o.targets) t.alpha_recall = t.alpha_precision = alpha;
        if (j.contains("optimizer")) o.optimizer = optimizer_settings_from_json(j.at("optimizer"), o.optimizer);
        o.validate();
        return o;
    });
}

Json to_json(const BenchOptions& o) {
    Json targets = Json::array();
    for (const auto& t : o.targets) targets.push_back({t.recall, t.precision});
    return {{"seed", o.seed},
            {"queries", o.queries},
            {"jobs", o.jobs},
            {"sample_fraction", o.sample_fraction},
            {"alpha", o.targets.empty() ? 0.95 : o.targets.front().alpha_recall},
            {"targets", std::move(targets)},
            {"variant", to_string(o.variant)},
            {"families", o.families},
            {"rows", o.workload.rows},
            {"correlation_penalty", o.workload.correlation_penalty},
            {"ladder", catalog_to_json(o.workload.ladder).at("profiles")},
            {"optimizer", to_json(o.optimizer)}};
}

Json to_json(const QueryResult& r) {
    return {{"query_id", r.query_id},
            {"family", r.family},
            {"variant", to_string(r.variant)},
            {"targets", to_json(r.targets)},
            {"status", to_string(r.status)},
            {"repaired", r.repaired},
            {"cost", r.cost},
            {"gold_cost", r.gold_cost},
            {"predicted_cost", r.predicted_cost},
            {"recall", r.recall},
            {"precision", r.precision},
            {"target_met_recall", number(r.target_met_recall)},
            {"target_met_precision", number(r.target_met_precision)},
            {"recall_bound", r.recall_bound},
            {"precision_bound", r.precision_bound},
            {"sample_size", r.sample_size},
            {"population_size", r.population_size},
            {"seconds", r.seconds}};
}

QueryResult query_result_from_json(const Json& j) {
    return guarded("query result", [&] {
        QueryResult r;
        r.query_id = j.at("query_id").get<std::string>();
        r.family = get_or(j, "family", std::string{});
        r.variant = variant_from_string(j.at("variant").get<std::string>());
        r.targets = targets_from_json(j.at("targets"));
        r.status = plan_status_from_string(j.at("status").get<std::string>());
        r.repaired = get_or(j, "repaired", false);
        r.cost = j.at("cost").get<double>();
        r.gold_cost = get_or(j, "gold_cost", 0.0);
        r.predicted_cost = get_or(j, "predicted_cost", 0.0);
        r.recall = j.at("recall").get<double>();
        r.precision = j.at("precision").get<double>();
        r.target_met_recall = get_number(j.at("target_met_recall"));
        r.target_met_precision = get_number(j.at("target_met_precision"));
        r.recall_bound = get_number(j, "recall_bound", 0.0);
        r.precision_bound = get_number(j, "precision_bound", 0.0);
        r.sample_size = get_or(j, "sample_size", std::size_t{0});
        r.population_size = get_or(j, "population_size", std::size_t{0});
        r.seconds = get_or(j, "seconds", 0.0);
        return r;
    });
}

Json to_json(const TargetSummary& s) {
    return {{"target_r", s.target_recall},
            {"target_p", s.target_precision},
            {"queries", s.queries},
            {"fraction_met_r", s.fraction_met_recall},
            {"fraction_met_p", s.fraction_met_precision},
            {"p5_target_met_r", number(s.p5_target_met_recall)},
            {"p5_target_met_p", number(s.p5_target_met_precision)},
            {"mean_cost", s.mean_cost},
            {"mean_gold_cost", s.mean_gold_cost},
            {"infeasible", s.infeasible},
            {"fallback", s.fallback}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw InvalidInput("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace semopt
