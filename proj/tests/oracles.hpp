#pragma once

// Reference implementations used only by the tests. None of them call into
// nmde_core: they recompute each quantity from its definition with a different
// algorithm (quadrature, dense algebra, brute-force enumeration).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
inline double bessel_k(double nu, double x) {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto f = [&](double t) {
        const double a = -x * std::cosh(t) + nu * t;
        if (a < -745.0) return 0.0;
        return 0.5 * (std::exp(a) + std::exp(-x * std::cosh(t) - nu * t));
    };
    return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

inline double matern(double d, double varrho2, double nu, double rho) {
    if (d == 0.0) return varrho2;
    const double u = std::sqrt(2.0 * nu) * d / rho;
    return varrho2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(u, nu) * bessel_k(nu, u);
}

inline double log_mvn(const Vector& x, const Matrix& cov) {
    const Eigen::FullPivLU<Matrix> lu(cov);
    const double quad = x.dot(lu.solve(x));
    return -0.5 * quad - 0.5 * std::log(lu.determinant()) -
           0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

inline double log_inverse_gamma(double x, double a, double b) {
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

inline double log_lognormal(double x, double mu, double s) {
    const double u = (std::log(x) - mu) / s;
    return -0.5 * u * u - std::log(x * s * std::sqrt(2.0 * std::numbers::pi));
}

// log p(z | psi, delta2) with z_j ~ N(psi, sigma2) iid and sigma2 ~ IW_1(dof, delta2),
// integrating over log sigma2.
inline double log_marginal_m1(const std::vector<double>& z, double psi, double delta2, double dof) {
    double s = 0.0;
    for (double v : z) s += (v - psi) * (v - psi);
    const double n = static_cast<double>(z.size());
    const double log_norm = 0.5 * dof * std::log(0.5 * delta2) - std::lgamma(0.5 * dof);
    auto log_integrand = [&](double u) {
        // sigma2 = e^u; prior density times Jacobian e^u
        const double prior = log_norm - (0.5 * dof + 1.0) * u - 0.5 * delta2 * std::exp(-u) + u;
        const double lik = -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * n * u - 0.5 * s * std::exp(-u);
        return prior + lik;
    };
    // locate the peak to keep the integrand O(1)
    double peak = -std::numeric_limits<double>::infinity();
    for (double u = -20.0; u <= 20.0; u += 0.01) peak = std::max(peak, log_integrand(u));
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double inf = std::numeric_limits<double>::infinity();
    const double value =
        integrator.integrate([&](double u) { return std::exp(log_integrand(u) - peak); }, -inf, inf);
    return peak + std::log(value);
}

// log p(Z | psi, delta2) for m = 2: rows z_j ~ N(psi, Sigma), Sigma ~ IW_2(dof, delta2 I).
// Integrates over the precision Omega = Sigma^{-1} ~ Wishart(dof, (delta2 I)^{-1}),
// Omega = [[a, b], [b, c]], b = sqrt(ac) r, as a three-dimensional quadrature.
inline double log_marginal_m2(const Matrix& z, const Vector& psi, double delta2, double dof) {
    const double n = static_cast<double>(z.rows());
    Matrix s = Matrix::Zero(2, 2);
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
        const Vector e = z.row(j).transpose() - psi;
        s += e * e.transpose();
    }
    const Matrix a_mat = delta2 * Matrix::Identity(2, 2) + s;
    // Wishart(dof, V) density with V = I / delta2:
    //   |Omega|^{(dof-3)/2} exp(-tr(V^{-1} Omega)/2) / (2^{dof} |V|^{dof/2} Gamma_2(dof/2))
    const double log_gamma2 =
        0.5 * std::log(std::numbers::pi) + std::lgamma(0.5 * dof) + std::lgamma(0.5 * (dof - 1.0));
    const double log_wishart_norm = -(dof * std::log(2.0) - dof * std::log(delta2) + log_gamma2);
    const double log_lik_norm = -n * std::log(2.0 * std::numbers::pi);
    const double power = 0.5 * (dof + n - 3.0);

    // the integrand in (a, c, r) is |Omega|^power exp(-tr(A Omega)/2) sqrt(ac)
    // with |Omega| = ac(1 - r^2); work in log a, log c for a smooth integrand
    auto log_f = [&](double la, double lc, double r) {
        const double a = std::exp(la);
        const double c = std::exp(lc);
        const double b = std::sqrt(a * c) * r;
        const double tr = a_mat(0, 0) * a + 2.0 * a_mat(0, 1) * b + a_mat(1, 1) * c;
        return power * (la + lc + std::log1p(-r * r)) - 0.5 * tr + 0.5 * (la + lc) + la + lc;
    };
    // peak near the mode of the Wishart(dof + n, A^{-1}) law
    const Matrix mode = (dof + n - 3.0) * a_mat.inverse();
    const double ref = log_f(std::log(mode(0, 0)), std::log(mode(1, 1)),
                             mode(0, 1) / std::sqrt(mode(0, 0) * mode(1, 1)));
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double lo0 = std::log(mode(0, 0)) - 12.0, hi0 = std::log(mode(0, 0)) + 6.0;
    const double lo1 = std::log(mode(1, 1)) - 12.0, hi1 = std::log(mode(1, 1)) + 6.0;
    auto inner = [&](double la, double lc) {
        return GK::integrate([&](double r) { return std::exp(log_f(la, lc, r) - ref); }, -1.0, 1.0, 10, 1e-13);
    };
    auto middle = [&](double la) {
        return GK::integrate([&](double lc) { return inner(la, lc); }, lo1, hi1, 10, 1e-12);
    };
    const double total = GK::integrate(middle, lo0, hi0, 10, 1e-11);
    return log_wishart_norm + log_lik_norm + ref + std::log(total);
}

// Gaussian log likelihood ratio statistic for |psi| <= 1 by grid search over
// (psi, log sigma2), refined around the best grid point.
inline double zeta_grid(const std::vector<double>& z) {
    const double n = static_cast<double>(z.size());
    auto loglik = [&](double psi, double ls2) {
        double s = 0.0;
        for (double v : z) s += (v - psi) * (v - psi);
        return -0.5 * n * ls2 - 0.5 * s * std::exp(-ls2);
    };
    auto sup = [&](double lo, double hi) {
        double best = -std::numeric_limits<double>::infinity();
        double bp = lo, bl = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double psi = lo + (hi - lo) * i / 400.0;
            for (int j = 0; j <= 400; ++j) {
                const double ls2 = -8.0 + 16.0 * j / 400.0;
                const double v = loglik(psi, ls2);
                if (v > best) best = v, bp = psi, bl = ls2;
            }
        }
        // local refinement on successively finer grids
        double wp = (hi - lo) / 400.0, wl = 16.0 / 400.0;
        for (int round = 0; round < 6; ++round) {
            const double cp = bp, cl = bl;
            for (int i = -20; i <= 20; ++i) {
                const double psi = std::clamp(cp + wp * i / 20.0, lo, hi);
                for (int j = -20; j <= 20; ++j) {
                    const double ls2 = cl + wl * j / 20.0;
                    const double v = loglik(psi, ls2);
                    if (v > best) best = v, bp = psi, bl = ls2;
                }
            }
            wp /= 10.0;
            wl /= 10.0;
        }
        return best;
    };
    return std::exp(sup(-1.0, 1.0) - sup(-20.0, 20.0));
}

// Brute force over all 2^m decisions. `r` is a T x m 0/1 table, `groups[i]`
// lists G_i (containing i). w_i(d) counts draws with r_i = 1 and r_j = d_j for
// the other members. Returns the lexicographically smallest maximizer.
struct BruteForce {
    std::vector<std::uint8_t> d;
    double objective = 0.0;
};

inline double f_beta(const std::vector<std::vector<std::uint8_t>>& r, const std::vector<std::vector<int>>& groups,
                     const std::vector<std::uint8_t>& d, double beta) {
    const auto m = d.size();
    long s = 0;
    long k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!d[i]) continue;
        ++k;
        for (const auto& row : r) {
            bool hit = row[i] == 1;
            for (int j : groups[i]) {
                if (static_cast<std::size_t>(j) != i && row[static_cast<std::size_t>(j)] != d[static_cast<std::size_t>(j)]) hit = false;
            }
            s += hit ? 1 : 0;
        }
    }
    return static_cast<double>(s) / static_cast<double>(r.size()) - beta * static_cast<double>(k);
}

inline BruteForce brute_force(const std::vector<std::vector<std::uint8_t>>& r,
                              const std::vector<std::vector<int>>& groups, double beta) {
    const auto m = groups.size();
    BruteForce best;
    best.objective = -std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> d(m);
    // d_0 is the most significant bit, so increasing masks run in lexicographic order
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        for (std::size_t i = 0; i < m; ++i) d[i] = static_cast<std::uint8_t>((mask >> (m - 1 - i)) & 1U);
        const double f = f_beta(r, groups, d, beta);
        if (f > best.objective) best = {d, f};
    }
    return best;
}

// Benjamini-Hochberg by the textbook definition: the largest i with
// p_(i) <= i q / m, rejecting every p <= p_(i).
inline std::vector<bool> bh(const std::vector<double>& p, double q) {
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(p.size());
    double cut = -1.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] <= static_cast<double>(i + 1) * q / m) cut = sorted[i];
    }
    std::vector<bool> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] <= cut;
    return out;
}

// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
template <class Cdf>
double ks_distance(std::vector<double> x, Cdf cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace oracle
