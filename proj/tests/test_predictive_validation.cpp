#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>

#include "nmde/errors.hpp"
#include "nmde/predictive.hpp"
#include "nmde/simulate.hpp"
#include "nmde/stats.hpp"
#include "test_util.hpp"

using namespace nmde;

TEST_CASE("inverse-Wishart draws have the right mean") {
    Matrix scale(3, 3);
    scale << 2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5;
    const double dof = 9.0;
    Rng rng = make_stream(1, 0);
    Matrix sum = Matrix::Zero(3, 3);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Matrix s = sample_inverse_wishart(dof, scale, rng);
        sum += s;
    }
    const Matrix mean = sum / n;
    const Matrix expect = scale / (dof - 3.0 - 1.0);
    CHECK((mean - expect).cwiseAbs().maxCoeff() < 0.01);
    CHECK_THROWS_AS(sample_inverse_wishart(1.5, scale, rng), ValidationError);
}

TEST_CASE("m = 1 predictive matches the Student-t") {
    Matrix z(4, 1);
    z << 0.3, -0.8, 1.2, 0.5;
    const double psi = 0.25, delta2 = 0.7, dof = 4.0;
    const int t = 200000;
    const Matrix psi_draws = Matrix::Constant(t, 1, psi);
    const Vector d2 = Vector::Constant(t, delta2);
    Rng rng = make_stream(2, 0);
    const Matrix draws = predictive_draws(z, psi_draws, d2, dof, rng);
    const double s = (z.array() - psi).square().sum();
    // Sigma ~ IG((dof + n) / 2, (delta2 + S) / 2) => z_new - psi ~ scale * t_{dof + n}
    const double nu = dof + 4.0;
    const double sc = std::sqrt((delta2 + s) / nu);
    const boost::math::students_t st(nu);
    std::vector<double> col(draws.data(), draws.data() + t);
    for (double q : {0.125, 0.5, 0.875}) {
        const double expect = psi + sc * boost::math::quantile(st, q);
        CAPTURE(q);
        CHECK(empirical_quantile(col, q) == doctest::Approx(expect).epsilon(0.01).scale(sc));
    }
}

TEST_CASE("composition sampling reproduces the matrix-t moments") {
    Matrix z(5, 2);
    z << 0.3, 1.0, -0.8, 0.4, 1.2, 1.5, 0.5, 0.2, 0.1, 0.9;
    Vector psi(2);
    psi << 0.2, 0.7;
    const double delta2 = 0.5, dof = 5.0;
    const int t = 200000;
    const Matrix psi_draws = psi.transpose().replicate(t, 1);
    Rng rng = make_stream(3, 0);
    const Matrix draws = predictive_draws(z, psi_draws, Vector::Constant(t, delta2), dof, rng);
    Matrix s = delta2 * Matrix::Identity(2, 2);
    for (int j = 0; j < 5; ++j) {
        const Vector e = z.row(j).transpose() - psi;
        s += e * e.transpose();
    }
    const Matrix cov = s / (dof + 5.0 - 2.0 - 1.0);
    const Vector mean = draws.colwise().mean();
    const Matrix centered = draws.rowwise() - mean.transpose();
    const Matrix emp = centered.transpose() * centered / (t - 1.0);
    CHECK((mean - psi).cwiseAbs().maxCoeff() < 4.0 * std::sqrt(cov.diagonal().maxCoeff() / t));
    CHECK((emp - cov).cwiseAbs().maxCoeff() < 0.03 * cov.cwiseAbs().maxCoeff());
}

TEST_CASE("interval width does not depend on training row order") {
    Matrix z(4, 3);
    z << 0.3, 1.0, 0.2, -0.8, 0.4, 0.1, 1.2, 1.5, -0.3, 0.5, 0.2, 0.0;
    Matrix perm = z;
    perm.row(0).swap(perm.row(3));
    perm.row(1).swap(perm.row(2));
    const Matrix psi = Matrix::Constant(5000, 3, 0.1);
    const Vector d2 = Vector::Constant(5000, 0.4);
    Rng a = make_stream(4, 0), b = make_stream(4, 0);
    const auto sa = summarize_predictive(predictive_draws(z, psi, d2, 6.0, a), Vector::Zero(3));
    const auto sb = summarize_predictive(predictive_draws(perm, psi, d2, 6.0, b), Vector::Zero(3));
    for (int i = 0; i < 3; ++i) CHECK(sa.high(i) - sa.low(i) == doctest::Approx(sb.high(i) - sb.low(i)).epsilon(1e-12));
}

TEST_CASE("predictive summary") {
    Matrix d(8, 2);
    d << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50, 6, 60, 7, 70, 8, 80;
    Vector obs(2);
    obs << 4.5, 100.0;
    const auto s = summarize_predictive(d, obs, 0.75);
    CHECK(s.low(0) == doctest::Approx(1.875));
    CHECK(s.high(0) == doctest::Approx(7.125));
    CHECK(s.covered[0]);
    CHECK_FALSE(s.covered[1]);
    CHECK(s.coverage == 0.5);
    for (int i = 0; i < 2; ++i) CHECK(s.low(i) <= s.high(i));
}

TEST_CASE("leave-one-out folds") {
    const auto names = synthetic_mirna_names(6);
    const auto ann = synthetic_annotation(names, 2, 1e5, 3);
    SimulationSpec spec;
    spec.n = 6;
    spec.hypers = std::vector<StrandHyperParams>{{1.0, 1.5, 3e4}, {2.0, 0.8, 5e4}};
    spec.seed = 8;
    const auto sim = simulate_dataset(ann, names, spec);
    FoldConfig cfg;
    cfg.annotation = ann;
    cfg.sampler.n_iterations = 3000;
    cfg.sampler.burn_in = 1000;
    cfg.sampler.thin = 2;
    cfg.sampler.seed = 12;

    const auto fold = loo_predictive(sim.data, 2, cfg);
    CHECK(fold.ok);
    CHECK(fold.held_out_patient == sim.data.patient_ids[2]);
    CHECK(fold.observed == sim.data.z.row(2).transpose());
    CHECK(fold.coverage >= 0.0);
    CHECK(fold.coverage <= 1.0);

    const auto a = loo_all(sim.data, cfg, 1, std::vector<int>{0, 2});
    const auto b = loo_all(sim.data, cfg, 3, std::vector<int>{0, 2});
    REQUIRE(a.size() == 2);
    CHECK(a[1].low == b[1].low);
    CHECK(a[1].high == b[1].high);
    CHECK(overall_coverage(a) == doctest::Approx((a[0].coverage + a[1].coverage) / 2.0));

    testutil::TempDir dir("cv");
    write_fold_csv(dir / "f.csv", fold);
    CHECK(testutil::read_text(dir / "f.csv").rfind("mirna,pred_low,pred_high,observed,covered\n", 0) == 0);

    ExpressionDataset tiny = sim.data;
    tiny.z = sim.data.z.topRows(2);
    tiny.case_ct = sim.data.case_ct.topRows(2);
    tiny.control_ct = sim.data.control_ct.topRows(2);
    tiny.patient_ids.resize(2);
    CHECK_THROWS_AS(loo_predictive(tiny, 0, cfg), ValidationError);
}

TEST_CASE("a held-out row at the posterior mean is covered") {
    Matrix z(6, 3);
    z << 0.3, 1.0, 0.2, -0.8, 0.4, 0.1, 1.2, 1.5, -0.3, 0.5, 0.2, 0.0, 0.1, 0.9, 0.4, -0.2, 0.6, 0.3;
    const Vector psi = z.colwise().mean();
    Rng rng = make_stream(6, 0);
    const Matrix draws = predictive_draws(z, psi.transpose().replicate(4000, 1), Vector::Constant(4000, 0.3), 6.0, rng);
    const auto s = summarize_predictive(draws, psi);
    CHECK(s.coverage == 1.0);
}
