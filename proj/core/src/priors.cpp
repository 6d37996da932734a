#include "nmde/priors.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "nmde/errors.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "priors_posterior";
constexpr double kRoundTripTol = 1e-8;

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

template <class F>
double bracketed_root(F f, double lo, double hi) {
    std::uintmax_t iters = 400;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (a + b);
}

double ig_log_variance(double shape, double mode) {
    // b = mode (a + 1); var = b^2 / ((a-1)^2 (a-2))
    return 2.0 * std::log(mode) + 2.0 * std::log(shape + 1.0) - 2.0 * std::log(shape - 1.0) - std::log(shape - 2.0);
}

}  // namespace

double InverseGamma::log_pdf(double x) const {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double InverseGamma::mean() const { return scale / (shape - 1.0); }

double InverseGamma::variance() const {
    return scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
}

double LogNormal::log_pdf(double x) const {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    const double lx = std::log(x);
    const double u = (lx - location) / scale;
    return -lx - std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * u * u;
}

double LogNormal::mode() const { return std::exp(location - scale * scale); }
double LogNormal::mean() const { return std::exp(location + 0.5 * scale * scale); }

double LogNormal::variance() const {
    const double s2 = scale * scale;
    return std::expm1(s2) * std::exp(2.0 * location + s2);
}

InverseGamma solve_ig(double mode, double variance) {
    if (!(mode > 0.0) || !(variance > 0.0) || !std::isfinite(mode) || !std::isfinite(variance)) {
        throw ValidationError(kModule, "inverse-gamma mode and variance must be positive");
    }
    const double target = std::log(variance);
    auto f = [&](double shape) { return ig_log_variance(shape, mode) - target; };

    double lo = 2.0 + 1e-12;
    if (!(f(lo) > 0.0)) throw NumericalError(kModule, "no inverse-gamma solution with shape > 2");
    double hi = 3.0;
    while (f(hi) > 0.0) {
        hi = 2.0 + 2.0 * (hi - 2.0);
        if (hi > 1e300) throw NumericalError(kModule, "inverse-gamma shape search diverged");
    }
    const double shape = bracketed_root(f, lo, hi);
    InverseGamma out{shape, mode * (shape + 1.0)};
    if (!close_rel(out.mode(), mode, kRoundTripTol) || !close_rel(out.variance(), variance, kRoundTripTol)) {
        throw NumericalError(kModule, "inverse-gamma solution failed the round-trip check");
    }
    return out;
}

LogNormal solve_lognormal(double mode, double variance) {
    if (!(mode > 0.0) || !(variance > 0.0) || !std::isfinite(mode) || !std::isfinite(variance)) {
        throw ValidationError(kModule, "log-normal mode and variance must be positive");
    }
    // variance = expm1(s2) * mode^2 * exp(3 s2); solve in u = log s2
    const double target = std::log(variance) - 2.0 * std::log(mode);
    auto g = [&](double u) {
        const double s2 = std::exp(u);
        return std::log(std::expm1(s2)) + 3.0 * s2 - target;
    };
    double lo = -700.0;
    double hi = 1.0;
    if (!(g(lo) < 0.0)) throw NumericalError(kModule, "log-normal variance too small to represent");
    while (g(hi) < 0.0) {
        hi += 2.0;
        if (hi > 10.0) throw NumericalError(kModule, "no positive log-normal s^2 solution");
    }
    const double s2 = std::exp(bracketed_root(g, lo, hi));
    LogNormal out{std::log(mode) + s2, std::sqrt(s2)};
    if (!close_rel(out.mode(), mode, kRoundTripTol) || !close_rel(out.variance(), variance, kRoundTripTol)) {
        throw NumericalError(kModule, "log-normal solution failed the round-trip check");
    }
    return out;
}

InverseGamma empirical_bayes_delta2(const Matrix& z) {
    if (z.rows() < 2) throw ValidationError(kModule, "empirical Bayes for delta^2 needs at least two patients");
    if (z.cols() < 1) throw ValidationError(kModule, "empirical Bayes for delta^2 needs at least one miRNA");
    const double n = static_cast<double>(z.rows());
    Vector s2(z.cols());
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        const double mean = z.col(i).mean();
        s2(i) = (z.col(i).array() - mean).square().sum() / (n - 1.0);
    }
    const double mean = s2.mean();
    if (!(mean > 0.0) || !std::isfinite(mean)) {
        throw ValidationError(kModule, "all miRNA columns are constant; delta^2 prior undefined");
    }
    double var = 0.0;
    if (s2.size() > 1) var = (s2.array() - mean).square().sum() / static_cast<double>(s2.size() - 1);
    if (!(var > 1e-12 * mean * mean) || !std::isfinite(var)) return InverseGamma{3.0, 2.0 * mean};
    const double shape = 2.0 + mean * mean / var;
    return InverseGamma{shape, mean * (shape - 1.0)};
}

double HyperPriorSpec::log_prior_varrho2(double varrho2) const {
    if (!(varrho2 > 0.0)) return -std::numeric_limits<double>::infinity();
    if (varrho_on == VarrhoPriorOn::varrho2) return varrho.log_pdf(varrho2);
    const double sd = std::sqrt(varrho2);
    return varrho.log_pdf(sd) - std::log(2.0 * sd);
}

double HyperPriorSpec::log_prior_strand(int strand, const StrandHyperParams& h) const {
    return log_prior_varrho2(h.varrho2) + nu.log_pdf(h.nu) + rho[static_cast<std::size_t>(strand)].log_pdf(h.rho);
}

StrandHyperParams HyperPriorSpec::draw_strand(int strand, Rng& rng) const {
    StrandHyperParams h;
    const double v = varrho.draw(rng);
    h.varrho2 = varrho_on == VarrhoPriorOn::varrho2 ? v : v * v;
    h.nu = nu.draw(rng);
    h.rho = rho[static_cast<std::size_t>(strand)].draw(rng);
    return h;
}

std::vector<StrandHyperParams> HyperPriorSpec::draw_hypers(Rng& rng) const {
    std::vector<StrandHyperParams> out;
    out.reserve(rho.size());
    for (int s = 0; s < k(); ++s) out.push_back(draw_strand(s, rng));
    return out;
}

double HyperPriorSpec::varrho2_mode() const {
    const double md = varrho.mode();
    return varrho_on == VarrhoPriorOn::varrho2 ? md : md * md;
}

StrandHyperParams HyperPriorSpec::mode_strand(int strand) const {
    return {varrho2_mode(), nu.mode(), rho[static_cast<std::size_t>(strand)].mode()};
}

HyperPriorSpec make_strand_priors(const GenomeAnnotation& annotation, const PriorSettings& settings) {
    HyperPriorSpec spec;
    spec.varrho = solve_ig(settings.varrho_mode, settings.varrho_variance);
    spec.varrho_on = settings.varrho_prior_on;
    spec.nu = solve_lognormal(settings.nu_mode, settings.nu_variance);
    for (const auto& strand : annotation.strands) {
        if (settings.rho_variance_scale == RhoVarianceScale::natural) {
            spec.rho.push_back(solve_lognormal(strand.length, settings.rho_variance));
        } else {
            // mode and variance both read on log(rho): log(rho) ~ N(log length, variance)
            const double s2 = settings.rho_variance;
            if (!(s2 > 0.0)) throw ValidationError(kModule, "rho prior variance must be positive");
            spec.rho.push_back(LogNormal{std::log(strand.length), std::sqrt(s2)});
        }
    }
    return spec;
}

HyperPriorSpec make_hyperprior_spec(const GenomeAnnotation& annotation, const Matrix& z,
                                    const PriorSettings& settings) {
    HyperPriorSpec spec = make_strand_priors(annotation, settings);
    spec.delta2 = empirical_bayes_delta2(z);
    spec.dof = static_cast<double>(z.cols()) + 3.0;
    return spec;
}

}  // namespace nmde
