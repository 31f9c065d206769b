#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace twostage {

// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Standard normal quantile. Acklam's rational approximation followed by one
// Halley refinement; absolute error well below 1e-9 over (0,1).
double normal_quantile(double p);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_upper_tail(double x, double df);

// Anderson-Darling statistic against a fully-specified standard normal.
// Input values are standardized observations; the function sorts a copy.
double anderson_darling_statistic(std::span<const double> standardized);

// Upper-tail p-value for the Anderson-Darling statistic (case of a fully
// specified null). Asymptotic CDF plus the finite-n correction of
// Marsaglia & Marsaglia.
double anderson_darling_pvalue(double a2, std::size_t n);

}  // namespace twostage
