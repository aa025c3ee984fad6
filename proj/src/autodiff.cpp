#include "semopt/autodiff.hpp"

#include "semopt/error.hpp"
#include "semopt/special_functions.hpp"

#include <algorithm>
#include <cmath>

namespace semopt {

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) {
        throw UsageError("operation on an unbound Var");
    }
    return *a.tape();
}

Tape& tape_of(Var a, Var b) {
    if (a.tape() != b.tape()) {
        throw UsageError("operands belong to different tapes");
    }
    return tape_of(a);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Tiny negative masses appear from cancellation in 1 - accept - reject.
double clamp_count(double c) {
    if (c < 0.0) {
        if (c < -1e-7) {
            throw NumericError("negative soft count passed to a credible bound");
        }
        return 0.0;
    }
    return c;
}

} // namespace

double Var::value() const { return tape_->value(index_); }

Var Tape::variable(double value) { return push(value, {}); }

Var Tape::constant(double value) { return push(value, {}); }

Var Tape::push(double value, std::initializer_list<Edge> edges) {
    return push(value, std::span<const Edge>(edges.begin(), edges.size()));
}

Var Tape::push(double value, std::span<const Edge> edges) {
    check_open();
    values_.push_back(value);
    edges_.insert(edges_.end(), edges.begin(), edges.end());
    edge_begin_.push_back(static_cast<std::uint32_t>(edges_.size()));
    return Var(this, static_cast<std::uint32_t>(values_.size() - 1));
}

void Tape::check_open() const {
    if (consumed_) {
        throw UsageError("tape already consumed by a backward pass; clear() it first");
    }
}

void Tape::backward(Var output) {
    if (output.tape() != this) {
        throw UsageError("backward seed does not belong to this tape");
    }
    check_open();
    consumed_ = true;
    adjoints_.assign(values_.size(), 0.0);
    adjoints_[output.index()] = 1.0;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const double adj = adjoints_[i];
        if (adj == 0.0) {
            continue;
        }
        for (std::uint32_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e) {
            adjoints_[edges_[e].parent] += adj * edges_[e].partial;
        }
    }
}

double Tape::gradient(Var v) const {
    if (!consumed_) {
        throw UsageError("gradients are only defined after backward()");
    }
    return adjoints_[v.index()];
}

std::vector<double> Tape::gradients(std::span<const Var> leaves) const {
    std::vector<double> out;
    out.reserve(leaves.size());
    for (Var v : leaves) {
        out.push_back(gradient(v));
    }
    return out;
}

void Tape::clear() {
    values_.clear();
    edges_.clear();
    edge_begin_.assign(1, 0);
    adjoints_.clear();
    consumed_ = false;
}

Var operator+(Var a, Var b) {
    return tape_of(a, b).push(a.value() + b.value(), {{a.index(), 1.0}, {b.index(), 1.0}});
}
Var operator+(Var a, double b) { return tape_of(a).push(a.value() + b, {{a.index(), 1.0}}); }
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, Var b) {
    return tape_of(a, b).push(a.value() - b.value(), {{a.index(), 1.0}, {b.index(), -1.0}});
}
Var operator-(Var a, double b) { return tape_of(a).push(a.value() - b, {{a.index(), 1.0}}); }
Var operator-(double a, Var b) { return tape_of(b).push(a - b.value(), {{b.index(), -1.0}}); }
Var operator-(Var a) { return tape_of(a).push(-a.value(), {{a.index(), -1.0}}); }
Var operator*(Var a, Var b) {
    return tape_of(a, b).push(a.value() * b.value(), {{a.index(), b.value()}, {b.index(), a.value()}});
}
Var operator*(Var a, double b) { return tape_of(a).push(a.value() * b, {{a.index(), b}}); }
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, Var b) {
    const double d = b.value();
    if (d == 0.0) {
        throw NumericError("division by zero on tape");
    }
    const double q = a.value() / d;
    return tape_of(a, b).push(q, {{a.index(), 1.0 / d}, {b.index(), -q / d}});
}
Var operator/(Var a, double b) {
    if (b == 0.0) {
        throw NumericError("division by zero on tape");
    }
    return tape_of(a).push(a.value() / b, {{a.index(), 1.0 / b}});
}
Var operator/(double a, Var b) {
    const double d = b.value();
    if (d == 0.0) {
        throw NumericError("division by zero on tape");
    }
    const double q = a / d;
    return tape_of(b).push(q, {{b.index(), -q / d}});
}

Var add(Var a, Var b) { return a + b; }
Var sub(Var a, Var b) { return a - b; }
Var mul(Var a, Var b) { return a * b; }
Var div(Var a, Var b) { return a / b; }
Var scale(Var a, double factor) { return a * factor; }

Var relu(Var a) {
    const double v = a.value();
    return tape_of(a).push(v > 0.0 ? v : 0.0, {{a.index(), v > 0.0 ? 1.0 : 0.0}});
}

Var softplus(Var a) {
    const double v = a.value();
    return tape_of(a).push(softplus(v), {{a.index(), stable_sigmoid(v)}});
}

Var log(Var a) {
    const double v = a.value();
    if (!(v > 0.0)) {
        throw NumericError("log of a nonpositive value on tape");
    }
    return tape_of(a).push(std::log(v), {{a.index(), 1.0 / v}});
}

Var exp(Var a) {
    const double e = std::exp(a.value());
    return tape_of(a).push(e, {{a.index(), e}});
}

Var sigmoid_with_temperature(Var s, double tau) {
    const double y = sigmoid_with_temperature(s.value(), tau);
    return tape_of(s).push(y, {{s.index(), y * (1.0 - y) / tau}});
}

std::array<Var, 3> softmax3_with_temperature(Var z1, Var z2, Var z3, double tau) {
    Tape& t = tape_of(z1, z2);
    tape_of(z1, z3);
    const auto p = softmax3_with_temperature(z1.value(), z2.value(), z3.value(), tau);
    const std::uint32_t idx[3] = {z1.index(), z2.index(), z3.index()};
    std::array<Var, 3> out;
    for (int i = 0; i < 3; ++i) {
        // d p_i / d z_j = p_i (delta_ij - p_j) / tau
        out[i] = t.push(p[i], {{idx[0], p[i] * ((i == 0 ? 1.0 : 0.0) - p[0]) / tau},
                               {idx[1], p[i] * ((i == 1 ? 1.0 : 0.0) - p[1]) / tau},
                               {idx[2], p[i] * ((i == 2 ? 1.0 : 0.0) - p[2]) / tau}});
    }
    return out;
}

std::vector<Var> softmax_with_temperature(std::span<const Var> logits, double tau) {
    std::vector<double> raw;
    raw.reserve(logits.size());
    for (Var v : logits) {
        raw.push_back(v.value());
    }
    const auto p = softmax_with_temperature(std::span<const double>(raw), tau);
    std::vector<Var> out;
    out.reserve(logits.size());
    std::vector<Tape::Edge> edges(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        for (std::size_t j = 0; j < logits.size(); ++j) {
            edges[j] = {logits[j].index(), p[i] * ((i == j ? 1.0 : 0.0) - p[j]) / tau};
        }
        out.push_back(tape_of(logits[i], logits[0]).push(p[i], edges));
    }
    return out;
}

Var sum(std::span<const Var> terms) {
    if (terms.empty()) {
        throw UsageError("sum over an empty span has no tape");
    }
    std::vector<Tape::Edge> edges;
    edges.reserve(terms.size());
    double total = 0.0;
    for (Var v : terms) {
        tape_of(terms[0], v);
        total += v.value();
        edges.push_back({v.index(), 1.0});
    }
    return terms[0].tape()->push(total, edges);
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs) {
    if (terms.empty() || terms.size() != coeffs.size()) {
        throw UsageError("weighted_sum needs matching nonempty spans");
    }
    std::vector<Tape::Edge> edges;
    edges.reserve(terms.size());
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        tape_of(terms[0], terms[i]);
        total += coeffs[i] * terms[i].value();
        edges.push_back({terms[i].index(), coeffs[i]});
    }
    return terms[0].tape()->push(total, edges);
}

Var credible_bound_node(Var tp, Var count2, double alpha, BoundKind kind) {
    Tape& t = tape_of(tp, count2);
    const double a = clamp_count(tp.value());
    const double b = clamp_count(count2.value());
    const CredibleBound bound =
        kind == BoundKind::recall ? recall_lower_bound(a, b, alpha) : precision_lower_bound(a, b, alpha);
    return t.push(bound.value, {{tp.index(), bound.d_value_d_a}, {count2.index(), bound.d_value_d_b}});
}

double relu(double a) { return a > 0.0 ? a : 0.0; }

double softplus(double a) {
    if (a > 30.0) return a + std::log1p(std::exp(-a));
    return std::log1p(std::exp(a));
}

double sigmoid_with_temperature(double s, double tau) {
    if (!(tau > 0.0)) {
        throw NumericError("temperature must be positive");
    }
    return stable_sigmoid(s / tau);
}

std::array<double, 3> softmax3_with_temperature(double z1, double z2, double z3, double tau) {
    if (!(tau > 0.0)) {
        throw NumericError("temperature must be positive");
    }
    const double m = std::max({z1, z2, z3});
    const double e1 = std::exp((z1 - m) / tau);
    const double e2 = std::exp((z2 - m) / tau);
    const double e3 = std::exp((z3 - m) / tau);
    const double total = e1 + e2 + e3;
    return {e1 / total, e2 / total, e3 / total};
}

std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau) {
    if (!(tau > 0.0)) {
        throw NumericError("temperature must be positive");
    }
    if (logits.empty()) {
        return {};
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - m) / tau);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double sum(std::span<const double> terms) {
    double total = 0.0;
    for (double v : terms) {
        total += v;
    }
    return total;
}

double weighted_sum(std::span<const double> terms, std::span<const double> coeffs) {
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        total += coeffs[i] * terms[i];
    }
    return total;
}

double credible_bound_node(double tp, double count2, double alpha, BoundKind kind) {
    const double a = clamp_count(tp);
    const double b = clamp_count(count2);
    return kind == BoundKind::recall ? recall_lower_bound(a, b, alpha).value
                                     : precision_lower_bound(a, b, alpha).value;
}

} // namespace semopt
