#include "nmde/matern.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "nmde/errors.hpp"

namespace nmde {

namespace {

using namespace boost::math::policies;
using QuietPolicy = policy<overflow_error<ignore_error>, underflow_error<ignore_error>,
                           evaluation_error<ignore_error>, domain_error<ignore_error>, promote_double<false>>;

// Uniform asymptotic expansion of K_nu(nu t), first two correction terms.
double log_bessel_k_debye(double nu, double x) {
    const double t = x / nu;
    const double root = std::sqrt(1.0 + t * t);
    const double p = 1.0 / root;
    const double eta = root + std::log(t / (1.0 + root));
    const double p2 = p * p;
    const double u1 = p * (3.0 - 5.0 * p2) / 24.0;
    const double u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0;
    const double series = 1.0 - u1 / nu + u2 / (nu * nu);
    return 0.5 * std::log(std::numbers::pi / (2.0 * nu)) - nu * eta - 0.5 * std::log(root) + std::log(series);
}

// Hankel expansion for large x at fixed nu.
double log_bessel_k_hankel(double nu, double x) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 8; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        sum += term;
    }
    return 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x + std::log(sum);
}

}  // namespace

bool StrandHyperParams::valid() const {
    return std::isfinite(varrho2) && std::isfinite(nu) && std::isfinite(rho) && varrho2 > 0.0 && nu > 0.0 &&
           rho > 0.0;
}

double log_bessel_k(double nu, double x) {
    const double k = boost::math::cyl_bessel_k(nu, x, QuietPolicy());
    if (std::isfinite(k) && k > DBL_MIN) return std::log(k);
    if (std::isfinite(k)) {
        // underflow: large argument relative to the order
        return nu > 20.0 ? log_bessel_k_debye(nu, x) : log_bessel_k_hankel(nu, x);
    }
    // overflow: small argument
    if (nu > 20.0) return log_bessel_k_debye(nu, x);
    return std::lgamma(nu) - std::numbers::ln2 + nu * std::log(2.0 / x);
}

double matern_correlation(double d, double nu, double rho) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw NumericalError("genome_model", "invalid distance");
    if (!(nu > 0.0) || !(rho > 0.0) || !std::isfinite(nu) || !std::isfinite(rho)) {
        throw NumericalError("genome_model", "invalid Matérn parameters");
    }
    if (d == 0.0) return 1.0;

    const double x = std::sqrt(2.0 * nu) * d / rho;
    if (!(x > 0.0)) return 1.0;  // d/rho below double resolution

    const double k = boost::math::cyl_bessel_k(nu, x, QuietPolicy());
    if (!std::isfinite(k) && nu <= 20.0) {
        // K_nu overflowed at a tiny argument; the correlation is 1 to within x^2.
        const double c = nu > 1.0 ? 1.0 - x * x / (4.0 * (nu - 1.0)) : 1.0;
        return std::clamp(c, 0.0, 1.0);
    }
    const double log_k = (std::isfinite(k) && k > DBL_MIN) ? std::log(k) : log_bessel_k(nu, x);
    const double log_c = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(x) + log_k;
    if (std::isnan(log_c)) throw NumericalError("genome_model", "Matérn correlation is not finite");
    return std::clamp(std::exp(log_c), 0.0, 1.0);
}

double matern_cov(double d, const StrandHyperParams& h) {
    if (!h.valid()) throw NumericalError("genome_model", "invalid strand hyperparameters");
    return h.varrho2 * matern_correlation(d, h.nu, h.rho);
}

}  // namespace nmde
