#include "semopt/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace semopt {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;

// lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2]
double stirling_remainder(double z) {
    if (z >= 10.0) {
        const double r = 1.0 / z;
        const double r2 = r * r;
        return r * (1.0 / 12.0 -
                    r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))));
    }
    return std::lgamma(z) - ((z - 0.5) * std::log(z) - z + kHalfLog2Pi);
}

// log(1 + e) - e without cancellation for small |e|.
double log1pmx(double e) {
    if (std::fabs(e) > 0.25) {
        return std::log1p(e) - e;
    }
    double term = e;
    double sum = 0.0;
    for (int k = 2; k < 200; ++k) {
        term *= -e;
        const double add = term / k;
        sum += add;
        if (std::fabs(add) <= kEps * std::fabs(sum)) {
            break;
        }
    }
    return sum;
}

// log of x^a y^b / B(a, b) with x = a/(a+b) + dx and y = 1 - x. Working from the offset
// keeps 1 - x out of the logarithms, where its rounding would be amplified by b. Far below
// the mean the argument itself is exact and carries more digits than the offset.
double log_power_terms(double x, double y, double dx, double a, double b) {
    const double sum = a + b;
    const auto part = [](double shape, double arg, double mean, double e) {
        if (e <= -1.0) return -std::numeric_limits<double>::infinity();
        if (e < -0.5) return shape * (std::log(arg / mean) - e);
        return shape * log1pmx(e);
    };
    // The first-order terms a*e + b*f cancel exactly.
    const double log_ratio = part(a, x, a / sum, dx / (a / sum)) + part(b, y, b / sum, -dx / (b / sum));
    return log_ratio + 0.5 * std::log(a * b / sum) - kHalfLog2Pi + stirling_remainder(sum) -
           stirling_remainder(a) - stirling_remainder(b);
}

// x - a/(a+b), taken from whichever of x and 1 - x is exact in floating point.
double mean_offset(double x, double a, double b) {
    if (x < 0.5) return x - a / (a + b);
    return b / (a + b) - (1.0 - x);
}

// Continued fraction for I_x(a,b) / (x^a y^b / B(a,b)), evaluated by modified Lentz.
// `lambda` is a*y - b*x, supplied by the caller so the cancellation near the mean is
// taken from the exact offset rather than from a rounded complement.
double beta_continued_fraction(double x, double a, double b, double lambda) {
    const auto term_b = [&](double m) {
        const double lead = m == 0.0 ? 0.0 : m + m * (b - m) * x / (a + 2.0 * m - 1.0);
        return lead + (a + m) * (lambda + 1.0 + m * (2.0 - x)) / (a + 2.0 * m + 1.0);
    };
    double f = term_b(0.0);
    if (f == 0.0) f = kTiny;
    double c = f;
    double d = 0.0;
    for (int m = 1; m <= 200000; ++m) {
        const double denom = a + m - 1.0 + m;
        const double an = (a + m - 1.0) * (a + b + m - 1.0) * m * (b - m) * x * x / (denom * denom);
        const double bn = term_b(m);
        d = bn + an * d;
        if (d == 0.0) d = kTiny;
        c = bn + an / c;
        if (c == 0.0) c = kTiny;
        d = 1.0 / d;
        const double del = c * d;
        f *= del;
        if (std::fabs(del - 1.0) <= kEps) break;
    }
    return 1.0 / f;
}

void check_shapes(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw std::domain_error("beta shapes must be positive and finite, got a=" + std::to_string(a) +
                                " b=" + std::to_string(b));
    }
}

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("log_gamma requires a positive argument");
    }
    return std::lgamma(x);
}

double log_beta(double a, double b) {
    check_shapes(a, b);
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double beta_pdf(double x, double a, double b) {
    check_shapes(a, b);
    if (x < 0.0 || x > 1.0) {
        return 0.0;
    }
    if (x == 0.0) {
        if (a < 1.0) return std::numeric_limits<double>::infinity();
        return a == 1.0 ? b : 0.0;
    }
    if (x == 1.0) {
        if (b < 1.0) return std::numeric_limits<double>::infinity();
        return b == 1.0 ? a : 0.0;
    }
    return std::exp(log_power_terms(x, 1.0 - x, mean_offset(x, a, b), a, b)) / (x * (1.0 - x));
}

double reg_inc_beta(double x, double a, double b) {
    check_shapes(a, b);
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("reg_inc_beta requires x in [0,1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double y = 1.0 - x;
    const double dx = mean_offset(x, a, b);
    const double lambda = -(a + b) * dx;
    if (lambda >= 0.0) {
        return std::min(1.0, std::exp(log_power_terms(x, y, dx, a, b)) * beta_continued_fraction(x, a, b, lambda));
    }
    const double tail = std::exp(log_power_terms(y, x, -dx, b, a)) * beta_continued_fraction(y, b, a, -lambda);
    return std::max(0.0, 1.0 - tail);
}

double reg_inc_beta_inv(double p, double a, double b) {
    check_shapes(a, b);
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("reg_inc_beta_inv requires p in [0,1]");
    }
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;

    double lo = 0.0;
    double hi = 1.0;
    double x = a / (a + b);
    for (int iter = 0; iter < 400; ++iter) {
        const double f = reg_inc_beta(x, a, b) - p;
        if (f == 0.0) {
            return x;
        }
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double density = beta_pdf(x, a, b);
        double next = x - f / density;
        if (!(density > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
            next = 0.5 * (lo + hi);
        }
        if (std::fabs(next - x) <= 2.0 * kEps * next || hi - lo <= 2.0 * kEps * hi) {
            return next;
        }
        x = next;
    }
    return x;
}

CredibleBound credible_lower_bound(double a, double b, double alpha) {
    check_shapes(a, b);
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("credible level must lie in (0,1)");
    }
    CredibleBound bound;
    bound.a = a;
    bound.b = b;
    bound.alpha = alpha;
    // P(theta >= l) = alpha  <=>  I_l(a, b) = 1 - alpha
    bound.value = reg_inc_beta_inv(1.0 - alpha, a, b);

    const double density = beta_pdf(bound.value, a, b);
    if (!(density > 0.0) || !std::isfinite(density)) {
        return bound;
    }
    const auto shape_partial = [&](double shape, auto&& eval) {
        const double h = 1e-5 * std::max(1.0, shape);
        if (shape - h > 0.0) {
            return (eval(shape + h) - eval(shape - h)) / (2.0 * h);
        }
        return (eval(shape + h) - eval(shape)) / h;
    };
    const double x = bound.value;
    const double di_da = shape_partial(a, [&](double s) { return reg_inc_beta(x, s, b); });
    const double di_db = shape_partial(b, [&](double s) { return reg_inc_beta(x, a, s); });
    bound.d_value_d_a = -di_da / density;
    bound.d_value_d_b = -di_db / density;
    return bound;
}

CredibleBound recall_lower_bound(double tp, double fn, double alpha) {
    if (tp < 0.0 || fn < 0.0) {
        throw std::domain_error("counts must be nonnegative");
    }
    return credible_lower_bound(1.0 + tp, 1.0 + fn, alpha);
}

CredibleBound precision_lower_bound(double tp, double fp, double alpha) {
    if (tp < 0.0 || fp < 0.0) {
        throw std::domain_error("counts must be nonnegative");
    }
    return credible_lower_bound(1.0 + tp, 1.0 + fp, alpha);
}

} // namespace semopt
