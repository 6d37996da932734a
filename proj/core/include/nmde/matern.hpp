#pragma once

namespace nmde {

/// Per-strand Matérn hyperparameters of the differential process.
/// varrho2 is the process variance, nu the smoothness and rho the correlation
/// length in base pairs.
struct StrandHyperParams {
    double varrho2 = 1.0;
    double nu = 1.0;
    double rho = 1.0;

    [[nodiscard]] bool valid() const;
};

/// Matérn correlation c(d)/varrho2 at distance d >= 0:
///   2^{1-nu}/Gamma(nu) * (sqrt(2 nu) d / rho)^nu * K_nu(sqrt(2 nu) d / rho).
///
/// Evaluated in log space. K_nu comes from Boost.Math (Temme series for small
/// arguments, continued fractions otherwise). When that overflows or
/// underflows, a uniform (Debye) expansion is used for nu > 20 and the
/// large-argument Hankel expansion otherwise; if the Bessel value overflows at
/// tiny arguments the small-argument expansion 1 - x^2/(4(nu-1)) is used.
/// Throws NumericalError when the result is not finite.
double matern_correlation(double d, double nu, double rho);

/// Matérn covariance varrho2 * matern_correlation(d, nu, rho); equals varrho2
/// at d == 0 and lies in [0, varrho2] otherwise (0 only on underflow).
double matern_cov(double d, const StrandHyperParams& h);

/// log K_nu(x) for x > 0, nu >= 0, with the fallbacks described above.
double log_bessel_k(double nu, double x);

}  // namespace nmde
