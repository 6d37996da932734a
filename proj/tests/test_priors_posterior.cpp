#include <doctest.h>

#include <random>

#include "nmde/errors.hpp"
#include "nmde/posterior.hpp"
#include "nmde/priors.hpp"
#include "oracles.hpp"

using namespace nmde;

namespace {

void check_ig_forward(const InverseGamma& g, double mode, double variance) {
    const double a = g.shape, b = g.scale;
    CHECK(b / (a + 1.0) == doctest::Approx(mode).epsilon(1e-8));
    CHECK(b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0)) == doctest::Approx(variance).epsilon(1e-8));
}

void check_lognormal_forward(const LogNormal& g, double mode, double variance) {
    const double mu = g.location, s2 = g.scale * g.scale;
    CHECK(std::exp(mu - s2) == doctest::Approx(mode).epsilon(1e-8));
    CHECK(std::expm1(s2) * std::exp(2.0 * mu + s2) == doctest::Approx(variance).epsilon(1e-8));
}

PosteriorModel small_model(const Matrix& z, const GenomeAnnotation& ann, const std::vector<std::string>& names) {
    const auto design = build_design_matrix(ann, names);
    return PosteriorModel{z, GenomeModel(ann, design), make_hyperprior_spec(ann, z), {}, true};
}

}  // namespace

TEST_CASE("inverse-gamma solver") {
    check_ig_forward(solve_ig(1.0, 100.0), 1.0, 100.0);
    check_ig_forward(solve_ig(2.0, 4.0), 2.0, 4.0);
    check_ig_forward(solve_ig(1e8, 1000.0), 1e8, 1000.0);
    // huge variance pushes the shape toward 2
    const auto wide = solve_ig(1.0, 1e8);
    CHECK(wide.shape > 2.0);
    CHECK(wide.shape < 2.01);
    CHECK_THROWS_AS(solve_ig(-1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(solve_ig(1.0, 0.0), ValidationError);
}

TEST_CASE("log-normal solver") {
    const auto g = solve_lognormal(1.0, 100.0);
    check_lognormal_forward(g, 1.0, 100.0);
    const double s2 = g.scale * g.scale;
    CHECK(g.location == doctest::Approx(s2));
    CHECK(std::expm1(s2) * std::exp(3.0 * s2) == doctest::Approx(100.0).epsilon(1e-8));

    const auto tight = solve_lognormal(3.0, 1e-6);
    check_lognormal_forward(tight, 3.0, 1e-6);
    CHECK(tight.location == doctest::Approx(std::log(3.0)).epsilon(1e-6));

    const auto point = solve_lognormal(1e8, 1000.0);
    check_lognormal_forward(point, 1e8, 1000.0);
    CHECK(point.scale * point.scale < 1e-12);
}

TEST_CASE("hyperprior densities match the textbook forms") {
    const InverseGamma ig{3.5, 2.0};
    const LogNormal ln{0.3, 1.1};
    for (double x : {0.1, 1.0, 7.5}) {
        CHECK(ig.log_pdf(x) == doctest::Approx(oracle::log_inverse_gamma(x, 3.5, 2.0)).epsilon(1e-12));
        CHECK(ln.log_pdf(x) == doctest::Approx(oracle::log_lognormal(x, 0.3, 1.1)).epsilon(1e-12));
    }
    CHECK(ig.mode() == doctest::Approx(2.0 / 4.5));
    CHECK(ig.mean() == doctest::Approx(2.0 / 2.5));
    CHECK(ln.mode() == doctest::Approx(std::exp(0.3 - 1.21)));
}

TEST_CASE("empirical Bayes for delta^2") {
    SUBCASE("moment matching on {1, 3}") {
        Matrix z(3, 2);
        const double r = std::sqrt(3.0);
        z << -1.0, -r, 0.0, 0.0, 1.0, r;
        const auto g = empirical_bayes_delta2(z);
        // mean 2, variance 2 (m - 1 divisor)
        CHECK(g.scale / (g.shape - 1.0) == doctest::Approx(2.0));
        CHECK(g.scale * g.scale / ((g.shape - 1.0) * (g.shape - 1.0) * (g.shape - 2.0)) == doctest::Approx(2.0));
        CHECK(g.shape == doctest::Approx(4.0));
        CHECK(g.scale == doctest::Approx(6.0));
    }
    SUBCASE("equal variances fall back to shape 3") {
        Matrix z(2, 3);
        z << 0.0, 1.0, 5.0, 2.0, 3.0, 7.0;
        const auto g = empirical_bayes_delta2(z);
        CHECK(g.shape == 3.0);
        CHECK(g.scale == doctest::Approx(4.0));
        CHECK(g.mean() == doctest::Approx(2.0));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(empirical_bayes_delta2(Matrix::Ones(1, 3)), ValidationError);
        CHECK_THROWS_AS(empirical_bayes_delta2(Matrix::Ones(4, 3)), ValidationError);
    }
}

TEST_CASE("hyperprior spec follows the settings") {
    const auto ann = make_annotation({{"a", "c1", "+", 10.0}, {"b", "c2", "-", 20.0}}, {{"c1", 5e6}, {"c2", 8e7}});
    Matrix z(3, 2);
    z << 0.1, 2.0, 0.5, -1.0, 1.5, 0.3;
    const auto spec = make_hyperprior_spec(ann, z);
    CHECK(spec.dof == 5.0);
    CHECK(spec.k() == 2);
    check_ig_forward(spec.varrho, 1.0, 100.0);
    check_lognormal_forward(spec.nu, 1.0, 100.0);
    check_lognormal_forward(spec.rho[0], 5e6, 1000.0);
    check_lognormal_forward(spec.rho[1], 8e7, 1000.0);

    PriorSettings log_scale;
    log_scale.rho_variance_scale = RhoVarianceScale::log;
    const auto alt = make_hyperprior_spec(ann, z, log_scale);
    CHECK(alt.rho[0].scale * alt.rho[0].scale == doctest::Approx(1000.0));
    CHECK(std::exp(alt.rho[0].location) == doctest::Approx(5e6));

    PriorSettings on_varrho;
    on_varrho.varrho_prior_on = VarrhoPriorOn::varrho;
    const auto v = make_hyperprior_spec(ann, z, on_varrho);
    // p(varrho2) = IG(sqrt(varrho2)) / (2 sqrt(varrho2))
    for (double x : {0.2, 1.0, 9.0}) {
        CHECK(v.log_prior_varrho2(x) ==
              doctest::Approx(oracle::log_inverse_gamma(std::sqrt(x), v.varrho.shape, v.varrho.scale) -
                              std::log(2.0 * std::sqrt(x))));
    }
}

TEST_CASE("psi prior term is the multivariate normal log density") {
    const auto ann = make_annotation({{"a", "c1", "+", 10.0}, {"b", "c1", "+", 40.0}, {"c", "c1", "+", 55.0},
                                      {"a", "c2", "-", 5.0}, {"d", "c2", "-", 30.0}});
    const std::vector<std::string> names{"a", "b", "c", "d"};
    const auto design = build_design_matrix(ann, names);
    const GenomeModel gm(ann, design);
    const std::vector<StrandHyperParams> h{{1.3, 1.1, 30.0}, {0.6, 2.0, 15.0}};
    const Matrix cov = prior_cov_psi(ann, design, h).psi_cov;
    Vector psi(4);
    psi << 0.4, -1.2, 2.0, 0.1;
    CHECK(*log_psi_prior(gm, h, psi) == doctest::Approx(oracle::log_mvn(psi, cov)).epsilon(1e-12));
    // psi = 0 leaves only the determinant and 2 pi terms
    const Vector zero = Vector::Zero(4);
    CHECK(*log_psi_prior(gm, h, zero) ==
          doctest::Approx(-0.5 * std::log(cov.determinant()) - 2.0 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("marginal likelihood against quadrature over Sigma") {
    SUBCASE("m = 1, n = 1") {
        const std::vector<double> zv{0.7};
        Matrix z(1, 1);
        z << 0.7;
        for (double psi : {-0.5, 0.2, 1.9}) {
            for (double d2 : {0.3, 1.0, 4.0}) {
                Vector p(1);
                p << psi;
                const double got = log_marginal_likelihood(z, p, d2, 4.0) + log_marginal_likelihood_constant(1, 1, 4.0);
                CHECK(got == doctest::Approx(oracle::log_marginal_m1(zv, psi, d2, 4.0)).epsilon(1e-8));
            }
        }
    }
    SUBCASE("m = 1, n = 3") {
        const std::vector<double> zv{0.7, -0.2, 1.4};
        Matrix z(3, 1);
        z << 0.7, -0.2, 1.4;
        Vector p(1);
        p << 0.3;
        const double got = log_marginal_likelihood(z, p, 1.7, 4.0) + log_marginal_likelihood_constant(1, 3, 4.0);
        CHECK(got == doctest::Approx(oracle::log_marginal_m1(zv, 0.3, 1.7, 4.0)).epsilon(1e-8));
    }
    SUBCASE("m = 2, n = 3") {
        Matrix z(3, 2);
        z << 0.7, 1.1, -0.2, 0.4, 1.4, 2.2;
        Vector p(2);
        p << 0.3, 1.0;
        const double got = log_marginal_likelihood(z, p, 0.8, 5.0) + log_marginal_likelihood_constant(2, 3, 5.0);
        CHECK(got == doctest::Approx(oracle::log_marginal_m2(z, p, 0.8, 5.0)).epsilon(1e-6));
    }
}

TEST_CASE("likelihood invariances") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> nd;
    Matrix z(5, 4);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = nd(gen);
    Vector psi(4);
    psi << 0.3, -0.7, 1.1, 0.0;
    const double base = log_marginal_likelihood(z, psi, 0.9, 7.0);

    SUBCASE("shifting a column of Z with its psi entry") {
        Matrix z2 = z;
        Vector p2 = psi;
        z2.col(2).array() += 3.25;
        p2(2) += 3.25;
        CHECK(log_marginal_likelihood(z2, p2, 0.9, 7.0) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("permuting patients") {
        Matrix z2 = z;
        z2.row(0).swap(z2.row(3));
        z2.row(1).swap(z2.row(4));
        CHECK(log_marginal_likelihood(z2, psi, 0.9, 7.0) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("log posterior and the evaluator agree") {
    const auto ann = make_annotation({{"a", "c1", "+", 1e3}, {"b", "c1", "+", 4e3}, {"c", "c2", "+", 2e3}},
                                     {{"c1", 1e4}, {"c2", 2e4}});
    const std::vector<std::string> names{"a", "b", "c"};
    Matrix z(4, 3);
    z << 0.5, 1.2, -0.3, 1.1, 0.8, -1.5, 0.2, 2.0, 0.4, 0.9, 1.7, -0.6;
    const auto model = small_model(z, ann, names);

    Vector lv(2), ln(2), lr(2);
    lv << 0.2, -0.4;
    ln << 0.1, 0.5;
    lr << std::log(8e3), std::log(1.5e4);
    Vector psi(3);
    psi << 0.4, 1.1, -0.5;
    const auto s = ModelState::from_log(psi, lv, ln, lr, -0.3);
    CHECK(std::exp(s.log_delta2) == s.delta2);
    CHECK(std::exp(lv(1)) == doctest::Approx(s.varrho2(1)).epsilon(1e-15));

    const double lp = log_posterior(s, model);
    CHECK(log_posterior(s, model) == lp);

    // every term recomputed from its oracle
    const Matrix cov = prior_cov_psi(ann, build_design_matrix(ann, names), s.hypers()).psi_cov;
    double expect = oracle::log_mvn(psi, cov) + log_marginal_likelihood(z, psi, s.delta2, model.priors.dof);
    expect += oracle::log_inverse_gamma(s.delta2, model.priors.delta2.shape, model.priors.delta2.scale);
    for (int l = 0; l < 2; ++l) {
        expect += oracle::log_inverse_gamma(s.varrho2(l), model.priors.varrho.shape, model.priors.varrho.scale);
        expect += oracle::log_lognormal(s.nu(l), model.priors.nu.location, model.priors.nu.scale);
        expect += oracle::log_lognormal(s.rho(l), model.priors.rho[static_cast<std::size_t>(l)].location,
                                        model.priors.rho[static_cast<std::size_t>(l)].scale);
    }
    CHECK(lp == doctest::Approx(expect).epsilon(1e-10));

    const Vector x = s.pack();
    CHECK(x.size() == ModelState::packed_size(3, 2));
    const auto back = ModelState::unpack(x, 3, 2);
    CHECK(back.psi == s.psi);
    CHECK(back.log_rho == s.log_rho);
    CHECK(back.log_delta2 == s.log_delta2);

    PosteriorEvaluator eval(model);
    const double e1 = eval(x);
    CHECK(e1 == doctest::Approx(lp + s.log_jacobian()).epsilon(1e-12));
    // a cached factor gives the same value
    CHECK(eval(x) == e1);
    Vector y = x;
    y(ModelState::hyper_offset(3, 1) + 2) += 0.1;
    const double e2 = eval(y);
    CHECK(e2 == doctest::Approx(log_posterior(ModelState::unpack(y, 3, 2), model) + ModelState::unpack(y, 3, 2).log_jacobian())
                    .epsilon(1e-12));
    CHECK(eval(x) == e1);

    Vector bad = x;
    bad(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(eval(bad) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("posterior differences match brute-force integration") {
    // m = 2 miRNAs on one strand, n = 3; two states differing in psi and delta^2
    const auto ann = make_annotation({{"a", "c1", "+", 100.0}, {"b", "c1", "+", 300.0}}, {{"c1", 1000.0}});
    const std::vector<std::string> names{"a", "b"};
    Matrix z(3, 2);
    z << 0.7, 1.1, -0.2, 0.4, 1.4, 2.2;
    const auto model = small_model(z, ann, names);
    const std::vector<StrandHyperParams> h{{1.5, 1.2, 400.0}};
    Vector p1(2), p2(2);
    p1 << 0.3, 1.0;
    p2 << 0.9, 0.2;
    const auto s1 = ModelState::from_positive(p1, h, 0.8);
    const auto s2 = ModelState::from_positive(p2, h, 1.9);

    const Matrix cov = prior_cov_psi(ann, build_design_matrix(ann, names), h).psi_cov;
    auto brute = [&](const Vector& p, double d2) {
        return oracle::log_mvn(p, cov) + oracle::log_marginal_m2(z, p, d2, model.priors.dof) +
               oracle::log_inverse_gamma(d2, model.priors.delta2.shape, model.priors.delta2.scale);
    };
    const double got = log_posterior(s1, model) - log_posterior(s2, model);
    const double expect = brute(p1, 0.8) - brute(p2, 1.9);
    CHECK(std::abs(got - expect) <= 1e-4 * std::abs(expect));
}
