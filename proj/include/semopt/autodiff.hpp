#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace semopt {

class Tape;

/// Handle to a scalar node on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    double value() const;
    Tape* tape() const { return tape_; }
    std::uint32_t index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

/// Append-only Wengert list. Every node stores its value and the local partials
/// towards its parents at construction time; backward() is then one reverse sweep.
///
/// A tape serves exactly one backward pass. clear() keeps the allocations so the
/// optimizer can rebuild the graph every iteration without reallocating.
class Tape {
public:
    struct Edge {
        std::uint32_t parent;
        double partial;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(double value);
    Var constant(double value);

    /// Records a node with the given value and local partials.
    Var push(double value, std::initializer_list<Edge> edges);
    Var push(double value, std::span<const Edge> edges);

    double value(std::uint32_t index) const { return values_[index]; }
    std::size_t size() const { return values_.size(); }

    /// Reverse sweep seeded at `output`. Throws UsageError when called twice
    /// without an intervening clear().
    void backward(Var output);
    double gradient(Var v) const;
    std::vector<double> gradients(std::span<const Var> leaves) const;

    bool consumed() const { return consumed_; }
    void clear();

private:
    void check_open() const;

    std::vector<double> values_;
    std::vector<std::uint32_t> edge_begin_{0};
    std::vector<Edge> edges_;
    std::vector<double> adjoints_;
    bool consumed_ = false;
};

// Arithmetic. Mixed Var/double overloads record a single node with one edge.
Var operator+(Var a, Var b);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator-(Var a);
Var operator*(Var a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var softplus(Var a);
Var log(Var a);
Var exp(Var a);

/// sigmoid(s / tau)
Var sigmoid_with_temperature(Var s, double tau);
/// softmax([z1, z2, z3] / tau)
std::array<Var, 3> softmax3_with_temperature(Var z1, Var z2, Var z3, double tau);
/// softmax over an arbitrary number of logits, each divided by tau.
std::vector<Var> softmax_with_temperature(std::span<const Var> logits, double tau);

/// n-ary sum, accumulated in index order.
Var sum(std::span<const Var> terms);
/// sum_i coeffs[i] * terms[i]
Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs);

enum class BoundKind { recall, precision };

/// Posterior lower bound of Beta(1 + tp, 1 + count2) at credible level alpha.
/// count2 is the false-negative mass for recall and the false-positive mass for
/// precision. Backward propagates the implicit-differentiation partials.
Var credible_bound_node(Var tp, Var count2, double alpha, BoundKind kind);

// Plain double counterparts so the relaxed pipeline can be evaluated without a tape.
double relu(double a);
double softplus(double a);
double sigmoid_with_temperature(double s, double tau);
std::array<double, 3> softmax3_with_temperature(double z1, double z2, double z3, double tau);
std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau);
double sum(std::span<const double> terms);
double weighted_sum(std::span<const double> terms, std::span<const double> coeffs);
double credible_bound_node(double tp, double count2, double alpha, BoundKind kind);

} // namespace semopt
