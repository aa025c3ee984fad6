#include "semopt/autodiff.hpp"
#include "semopt/error.hpp"
#include "semopt/special_functions.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace semopt;

namespace {

/// Gradient of f at x by reverse mode.
std::vector<double> reverse_grad(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                                 const std::vector<double>& x) {
    Tape tape;
    std::vector<Var> leaves;
    for (double v : x) leaves.push_back(tape.variable(v));
    tape.backward(f(tape, leaves));
    return tape.gradients(leaves);
}

double eval(const std::function<Var(Tape&, const std::vector<Var>&)>& f, const std::vector<double>& x) {
    Tape tape;
    std::vector<Var> leaves;
    for (double v : x) leaves.push_back(tape.variable(v));
    return f(tape, leaves).value();
}

void check_against_fd(const std::function<Var(Tape&, const std::vector<Var>&)>& f, const std::vector<double>& x) {
    const auto g = reverse_grad(f, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto up = x;
        auto down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (eval(f, up) - eval(f, down)) / 2e-6;
        CAPTURE(i);
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}

} // namespace

TEST_CASE("primitive values") {
    Tape tape;
    const Var a = tape.variable(1.5);
    const Var b = tape.variable(-0.5);
    CHECK((a + b).value() == 1.0);
    CHECK((a - b).value() == 2.0);
    CHECK((a * b).value() == -0.75);
    CHECK((a / b).value() == -3.0);
    CHECK(relu(b).value() == 0.0);
    CHECK(relu(a).value() == 1.5);
    CHECK(scale(a, 4.0).value() == 6.0);
    CHECK(sigmoid_with_temperature(tape.variable(0.0), 1.0).value() == 0.5);
    CHECK(sigmoid_with_temperature(tape.variable(0.0), 1e-3).value() == 0.5);
    const auto s = softmax3_with_temperature(tape.variable(0), tape.variable(0), tape.variable(0), 0.7);
    for (const Var& v : s) CHECK(v.value() == doctest::Approx(1.0 / 3.0));
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("relu below zero has zero gradient") {
    Tape tape;
    const Var x = tape.variable(-0.2);
    const Var y = relu(x);
    CHECK(y.value() == 0.0);
    tape.backward(y);
    CHECK(tape.gradient(x) == 0.0);
}

TEST_CASE("composite gradients match finite differences") {
    check_against_fd(
        [](Tape&, const std::vector<Var>& v) {
            return log(v[0] * v[1] + exp(v[2])) / (1.0 + softplus(v[0] - v[2])) - relu(v[1] - 0.1) * 3.0;
        },
        {0.7, 1.3, -0.4});
    check_against_fd(
        [](Tape&, const std::vector<Var>& v) {
            const auto p = softmax3_with_temperature(v[0], v[1], v[2], 0.3);
            return p[0] * 2.0 + p[1] * p[2] + sigmoid_with_temperature(v[0] - v[1], 0.5);
        },
        {0.2, -0.1, 0.4});
    check_against_fd(
        [](Tape&, const std::vector<Var>& v) {
            const std::vector<double> coeffs{0.5, -1.0, 2.0, 0.25};
            return weighted_sum(v, coeffs) * sum(v);
        },
        {0.2, 1.1, -0.6, 2.0});
    check_against_fd(
        [](Tape&, const std::vector<Var>& v) {
            const auto w = softmax_with_temperature(v, 0.8);
            return w[0] - w[3] * w[1];
        },
        {0.2, 1.1, -0.6, 2.0});
}

TEST_CASE("softmax3 gradients are tangent to the simplex") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double z[3] = {u(rng), u(rng), u(rng)};
        const double tau = 0.1 + std::fabs(u(rng));
        // d(p0 + p1 + p2)/dz_j = 0 for each input j.
        for (int j = 0; j < 3; ++j) {
            double total = 0.0;
            for (int out = 0; out < 3; ++out) {
                Tape tape;
                const Var a = tape.variable(z[0]);
                const Var b = tape.variable(z[1]);
                const Var c = tape.variable(z[2]);
                const auto p = softmax3_with_temperature(a, b, c, tau);
                tape.backward(p[out]);
                total += tape.gradient(j == 0 ? a : j == 1 ? b : c);
            }
            CHECK(std::fabs(total) < 1e-12);
        }
    }
}

TEST_CASE("credible bound node value and partials") {
    Tape tape;
    const Var tp = tape.variable(0.0);
    const Var fn = tape.variable(0.0);
    CHECK(credible_bound_node(tp, fn, 0.95, BoundKind::recall).value() == doctest::Approx(0.05).epsilon(1e-10));

    Tape t2;
    const Var tp2 = t2.variable(19.0);
    const Var fn2 = t2.variable(1.0);
    const Var b = credible_bound_node(tp2, fn2, 0.95, BoundKind::precision);
    t2.backward(b);
    const CredibleBound ref = precision_lower_bound(19.0, 1.0, 0.95);
    CHECK(b.value() == ref.value);
    CHECK(t2.gradient(tp2) == ref.d_value_d_a);
    CHECK(t2.gradient(fn2) == ref.d_value_d_b);
    CHECK(t2.gradient(tp2) > 0.0);
}

TEST_CASE("tape misuse is reported") {
    Tape tape;
    const Var x = tape.variable(2.0);
    const Var y = x * x;
    tape.backward(y);
    CHECK(tape.consumed());
    CHECK(tape.gradient(x) == 4.0);
    CHECK_THROWS_AS(tape.backward(y), UsageError);
    tape.clear();
    CHECK_FALSE(tape.consumed());
    CHECK(tape.size() == 0);

    Tape other;
    const Var a = tape.variable(1.0);
    const Var b = other.variable(1.0);
    CHECK_THROWS_AS(a + b, UsageError);
}

TEST_CASE("numeric failures surface as NumericError") {
    Tape tape;
    const Var x = tape.variable(1.0);
    const Var zero = tape.variable(0.0);
    CHECK_THROWS_AS(x / zero, NumericError);
    CHECK_THROWS_AS(x / 0.0, NumericError);
    CHECK_THROWS_AS(log(zero), NumericError);
    CHECK_THROWS_AS(sigmoid_with_temperature(x, 0.0), NumericError);
    CHECK_THROWS_AS(credible_bound_node(tape.variable(-1.0), x, 0.95, BoundKind::recall), NumericError);
}

TEST_CASE("gradients accumulate over shared subexpressions") {
    Tape tape;
    const Var x = tape.variable(3.0);
    const Var y = x * x;
    const Var z = y + y * x;  // x^2 + x^3
    tape.backward(z);
    CHECK(tape.gradient(x) == doctest::Approx(2 * 3.0 + 3 * 9.0));
}
