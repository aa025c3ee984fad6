#include "semopt/plan_ir.hpp"

#include "semopt/error.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

namespace semopt {

namespace {

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && *(last - 1) == ' ') --last;
    if (first == last) return std::nullopt;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

bool is_binary(OperatorKind kind) {
    return kind == OperatorKind::relational_join || kind == OperatorKind::cartesian_product ||
           kind == OperatorKind::semantic_join;
}

bool is_relational(OperatorKind kind) {
    return kind == OperatorKind::relational_filter || kind == OperatorKind::relational_join ||
           kind == OperatorKind::cartesian_product;
}

bool intersects(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (const auto& x : a) {
        if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    }
    return false;
}

} // namespace

const char* to_string(OperatorKind kind) {
    switch (kind) {
    case OperatorKind::scan: return "scan";
    case OperatorKind::relational_filter: return "relational_filter";
    case OperatorKind::relational_join: return "relational_join";
    case OperatorKind::cartesian_product: return "cartesian_product";
    case OperatorKind::semantic_filter: return "semantic_filter";
    case OperatorKind::semantic_map: return "semantic_map";
    case OperatorKind::semantic_join: return "semantic_join";
    }
    return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& name) {
    static const std::map<std::string, OperatorKind> kinds = {
        {"scan", OperatorKind::scan},
        {"relational_filter", OperatorKind::relational_filter},
        {"relational_join", OperatorKind::relational_join},
        {"cartesian_product", OperatorKind::cartesian_product},
        {"semantic_filter", OperatorKind::semantic_filter},
        {"semantic_map", OperatorKind::semantic_map},
        {"semantic_join", OperatorKind::semantic_join},
    };
    auto it = kinds.find(name);
    if (it == kinds.end()) {
        throw InvalidInput("unknown operator kind '" + name + "'");
    }
    return it->second;
}

bool is_semantic(OperatorKind kind) {
    return kind == OperatorKind::semantic_filter || kind == OperatorKind::semantic_map ||
           kind == OperatorKind::semantic_join;
}

const char* to_string(CompareOp op) {
    switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    }
    return "?";
}

CompareOp compare_op_from_string(const std::string& name) {
    if (name == "==" || name == "=") return CompareOp::eq;
    if (name == "!=") return CompareOp::ne;
    if (name == "<") return CompareOp::lt;
    if (name == "<=") return CompareOp::le;
    if (name == ">") return CompareOp::gt;
    if (name == ">=") return CompareOp::ge;
    throw InvalidInput("unknown comparison '" + name + "'");
}

bool ColumnPredicate::matches(const std::string& cell) const {
    int cmp;
    const auto lhs = parse_number(cell);
    const auto rhs = parse_number(value);
    if (lhs && rhs) {
        cmp = *lhs < *rhs ? -1 : (*lhs > *rhs ? 1 : 0);
    } else {
        cmp = cell.compare(value);
        cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
    }
    switch (op) {
    case CompareOp::eq: return cmp == 0;
    case CompareOp::ne: return cmp != 0;
    case CompareOp::lt: return cmp < 0;
    case CompareOp::le: return cmp <= 0;
    case CompareOp::gt: return cmp > 0;
    case CompareOp::ge: return cmp >= 0;
    }
    return false;
}

void QualityTargets::validate() const {
    const auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
    const auto level = [](double v) { return v > 0.0 && v < 1.0; };
    if (!fraction(recall) || !fraction(precision)) {
        throw InvalidInput("recall and precision targets must lie in [0,1]");
    }
    if (!level(alpha_recall) || !level(alpha_precision)) {
        throw InvalidInput("credible levels must lie in (0,1)");
    }
}

std::vector<std::string> LogicalOperator::read_columns() const {
    std::vector<std::string> cols = reads;
    if (kind == OperatorKind::relational_filter && filter) {
        cols.push_back(filter->column);
    }
    if (kind == OperatorKind::relational_join) {
        cols.push_back(left_column);
        cols.push_back(right_column);
    }
    return cols;
}

std::vector<std::string> LogicalOperator::written_columns() const {
    if (kind == OperatorKind::semantic_map) {
        return {output_column};
    }
    return {};
}

std::size_t LogicalPlan::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id == id) return i;
    }
    throw InvalidInput("unknown operator id '" + id + "'");
}

const LogicalOperator& LogicalPlan::node(const std::string& id) const { return nodes[index_of(id)]; }

std::vector<std::string> LogicalPlan::inputs_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges) {
        if (to == id) out.push_back(from);
    }
    return out;
}

std::vector<std::string> LogicalPlan::consumers_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges) {
        if (from == id) out.push_back(to);
    }
    return out;
}

std::vector<std::string> LogicalPlan::topological_order() const {
    std::map<std::string, int> indegree;
    for (const auto& n : nodes) indegree[n.id] = 0;
    for (const auto& [from, to] : edges) {
        if (!indegree.count(from) || !indegree.count(to)) {
            throw InvalidInput("edge references unknown operator '" + (indegree.count(from) ? to : from) + "'");
        }
        ++indegree[to];
    }
    std::vector<std::string> order;
    std::vector<bool> emitted(nodes.size(), false);
    // Kahn's algorithm, scanning in node order so the result is deterministic.
    while (order.size() < nodes.size()) {
        bool progressed = false;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (emitted[i] || indegree[nodes[i].id] != 0) continue;
            emitted[i] = true;
            order.push_back(nodes[i].id);
            for (const auto& c : consumers_of(nodes[i].id)) --indegree[c];
            progressed = true;
        }
        if (!progressed) {
            throw InvalidInput("logical plan contains a cycle");
        }
    }
    return order;
}

std::string LogicalPlan::sink() const {
    std::string found;
    for (const auto& n : nodes) {
        if (consumers_of(n.id).empty()) {
            if (!found.empty()) {
                throw InvalidInput("logical plan has more than one sink ('" + found + "', '" + n.id + "')");
            }
            found = n.id;
        }
    }
    if (found.empty()) {
        throw InvalidInput("logical plan has no sink");
    }
    return found;
}

void LogicalPlan::validate() const {
    if (nodes.empty()) {
        throw InvalidInput("logical plan has no operators");
    }
    std::set<std::string> ids;
    for (const auto& n : nodes) {
        if (n.id.empty() || !ids.insert(n.id).second) {
            throw InvalidInput("operator ids must be unique and nonempty ('" + n.id + "')");
        }
    }
    std::set<std::pair<std::string, std::string>> seen_edges;
    for (const auto& e : edges) {
        if (!seen_edges.insert(e).second) {
            throw InvalidInput("duplicate edge " + e.first + " -> " + e.second);
        }
    }
    topological_order();
    sink();
    for (const auto& n : nodes) {
        const std::size_t arity = inputs_of(n.id).size();
        const std::size_t expected = n.kind == OperatorKind::scan ? 0 : (is_binary(n.kind) ? 2 : 1);
        if (arity != expected) {
            throw InvalidInput("operator '" + n.id + "' of kind " + to_string(n.kind) + " expects " +
                               std::to_string(expected) + " inputs, has " + std::to_string(arity));
        }
        if (is_semantic(n.kind) && n.predicate_id.empty()) {
            throw InvalidInput("semantic operator '" + n.id + "' lacks a predicate_id");
        }
        if ((n.kind == OperatorKind::semantic_map) != !n.output_column.empty()) {
            throw InvalidInput("operator '" + n.id + "': output_column is required for and only for semantic maps");
        }
        if (n.kind == OperatorKind::scan && n.table.empty()) {
            throw InvalidInput("scan '" + n.id + "' lacks a table");
        }
        if (n.kind == OperatorKind::relational_filter && !n.filter) {
            throw InvalidInput("relational filter '" + n.id + "' lacks a predicate");
        }
        if (n.kind == OperatorKind::relational_join && (n.left_column.empty() || n.right_column.empty())) {
            throw InvalidInput("relational join '" + n.id + "' lacks join columns");
        }
    }
    targets.validate();
}

void LogicalPlan::annotate_scopes() {
    std::map<std::string, std::set<std::string>> tables;
    for (const auto& id : topological_order()) {
        auto& n = nodes[index_of(id)];
        std::set<std::string> acc;
        if (n.kind == OperatorKind::scan) acc.insert(n.table);
        for (const auto& in : inputs_of(id)) acc.insert(tables[in].begin(), tables[in].end());
        tables[id] = acc;
        if (is_semantic(n.kind) && n.scope.empty()) {
            n.scope.assign(acc.begin(), acc.end());
        }
    }
}

std::vector<std::string> LogicalPlan::semantic_pipeline() const {
    std::vector<std::string> chain;
    std::string cur = sink();
    while (true) {
        const auto& n = node(cur);
        if (n.kind != OperatorKind::semantic_filter && n.kind != OperatorKind::semantic_map) break;
        chain.push_back(cur);
        const auto in = inputs_of(cur);
        if (in.size() != 1 || consumers_of(in[0]).size() != 1) break;
        cur = in[0];
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

std::vector<std::string> LogicalPlan::semantic_predicates() const {
    std::vector<std::string> preds;
    for (const auto& n : nodes) {
        if (is_semantic(n.kind)) preds.push_back(n.predicate_id);
    }
    std::sort(preds.begin(), preds.end());
    return preds;
}

bool operator==(const ColumnPredicate& a, const ColumnPredicate& b) {
    return a.column == b.column && a.op == b.op && a.value == b.value;
}

bool operator==(const QualityTargets& a, const QualityTargets& b) {
    return a.recall == b.recall && a.precision == b.precision && a.alpha_recall == b.alpha_recall &&
           a.alpha_precision == b.alpha_precision;
}

bool operator==(const LogicalOperator& a, const LogicalOperator& b) {
    return a.id == b.id && a.kind == b.kind && a.predicate_id == b.predicate_id &&
           a.output_column == b.output_column && a.table == b.table && a.filter == b.filter &&
           a.left_column == b.left_column && a.right_column == b.right_column && a.reads == b.reads &&
           a.scope == b.scope;
}

bool LogicalPlan::operator==(const LogicalPlan& other) const {
    return nodes == other.nodes && edges == other.edges && targets == other.targets;
}

LogicalPlan pull_up_semantic(const LogicalPlan& input) {
    input.validate();
    LogicalPlan plan = input;
    plan.annotate_scopes();

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& x : plan.nodes) {
            if (x.kind != OperatorKind::semantic_filter && x.kind != OperatorKind::semantic_map) continue;
            const auto consumers = plan.consumers_of(x.id);
            if (consumers.size() != 1) continue;
            const auto& c = plan.node(consumers[0]);
            if (!is_relational(c.kind)) continue;
            const auto written = x.written_columns();
            if (intersects(written, c.read_columns()) || intersects(written, c.written_columns())) continue;

            // producer -> x -> c -> rest   becomes   producer -> c -> x -> rest
            const std::string producer = plan.inputs_of(x.id).front();
            const std::string xid = x.id;
            const std::string cid = c.id;
            for (auto& e : plan.edges) {
                if (e.first == producer && e.second == xid) {
                    e = {producer, cid};  // keeps c's input position
                } else if (e.first == xid && e.second == cid) {
                    e = {cid, xid};
                } else if (e.first == cid) {
                    e.first = xid;
                }
            }
            changed = true;
            break;
        }
    }
    plan.validate();
    return plan;
}

LogicalPlan rewrite_semantic_join(const LogicalPlan& input) {
    input.validate();
    const bool any_join = std::any_of(input.nodes.begin(), input.nodes.end(),
                                      [](const LogicalOperator& n) { return n.kind == OperatorKind::semantic_join; });
    if (!any_join) return input;
    LogicalPlan plan = input;
    plan.annotate_scopes();

    std::vector<LogicalOperator> nodes;
    for (const auto& n : plan.nodes) {
        if (n.kind != OperatorKind::semantic_join) {
            nodes.push_back(n);
            continue;
        }
        LogicalOperator product;
        product.id = n.id + "_product";
        product.kind = OperatorKind::cartesian_product;
        LogicalOperator filter = n;
        filter.kind = OperatorKind::semantic_filter;
        nodes.push_back(product);
        nodes.push_back(filter);
        for (auto& e : plan.edges) {
            if (e.second == n.id) e.second = product.id;
        }
        plan.edges.emplace_back(product.id, n.id);
    }
    plan.nodes = std::move(nodes);
    // The filter kept the join's id, so downstream edges still point at it.
    plan.validate();
    return plan;
}

void validate_candidates(const std::vector<PhysicalCandidate>& candidates) {
    std::map<std::string, std::vector<const PhysicalCandidate*>> by_operator;
    std::set<std::string> ids;
    for (const auto& c : candidates) {
        if (!ids.insert(c.id).second) {
            throw InvalidInput("duplicate candidate id '" + c.id + "'");
        }
        if (!(c.cost_per_tuple >= 0.0)) {
            throw InvalidInput("candidate '" + c.id + "' has negative cost");
        }
        by_operator[c.implements].push_back(&c);
    }
    for (const auto& [op, list] : by_operator) {
        const PhysicalCandidate* gold = nullptr;
        for (const auto* c : list) {
            if (c->is_gold) {
                if (gold) throw InvalidInput("operator '" + op + "' has more than one gold candidate");
                gold = c;
            }
        }
        if (!gold) throw InvalidInput("operator '" + op + "' has no gold candidate");
        for (const auto* c : list) {
            if (c->cost_per_tuple > gold->cost_per_tuple) {
                throw InvalidInput("candidate '" + c->id + "' costs more than the gold candidate of '" + op + "'");
            }
        }
    }
}

const char* to_string(DecisionKind kind) {
    return kind == DecisionKind::two_threshold_score ? "two_threshold_score" : "direct_value";
}

DecisionKind decision_kind_from_string(const std::string& name) {
    if (name == "two_threshold_score") return DecisionKind::two_threshold_score;
    if (name == "direct_value") return DecisionKind::direct_value;
    throw InvalidInput("unknown decision kind '" + name + "'");
}

} // namespace semopt
