#pragma once

namespace semopt {

double log_gamma(double x);
double log_beta(double a, double b);

/// Density of Beta(a, b) at x.
double beta_pdf(double x, double a, double b);

/// Regularized incomplete beta function I_x(a, b).
///
/// Lentz continued fraction on whichever side of (a+1)/(a+b+2) converges fast; the
/// x^a (1-x)^b / B(a,b) prefactor is evaluated around the mode with Stirling
/// corrections so that shapes up to ~1e6 keep absolute error near 1e-13.
/// Throws std::domain_error for x outside [0,1] or nonpositive shapes.
double reg_inc_beta(double x, double a, double b);

/// Inverse of reg_inc_beta in x: returns x with I_x(a, b) = p.
/// Safeguarded Newton iteration inside a shrinking [lo, hi] bracket; converges to
/// machine precision.
double reg_inc_beta_inv(double p, double a, double b);

/// Posterior lower bound of a Beta(a, b) belief at credible level alpha, i.e. the
/// value l with P(theta >= l) = alpha, together with its partials in a and b
/// obtained by implicit differentiation of I_l(a, b) = 1 - alpha.
struct CredibleBound {
    double value = 0.0;
    double d_value_d_a = 0.0;
    double d_value_d_b = 0.0;
    double a = 1.0;
    double b = 1.0;
    double alpha = 0.95;
};

CredibleBound credible_lower_bound(double a, double b, double alpha);

/// Beta(1,1) prior updated with soft true-positive / false-negative counts.
CredibleBound recall_lower_bound(double tp, double fn, double alpha);
/// Beta(1,1) prior updated with soft true-positive / false-positive counts.
CredibleBound precision_lower_bound(double tp, double fp, double alpha);

} // namespace semopt
