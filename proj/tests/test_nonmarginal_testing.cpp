#include <doctest.h>

#include <random>

#include "nmde/errors.hpp"
#include "nmde/nonmarginal.hpp"
#include "nmde/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace nmde;

namespace {

using Table = std::vector<std::vector<std::uint8_t>>;

IndicatorMatrix to_indicator(const Table& t) {
    std::vector<std::uint8_t> bits;
    for (const auto& row : t) bits.insert(bits.end(), row.begin(), row.end());
    return IndicatorMatrix(static_cast<int>(t.size()), static_cast<int>(t[0].size()), bits);
}

GroupStructure to_groups(const std::vector<std::vector<int>>& g) {
    GroupStructure s = GroupStructure::singletons(static_cast<int>(g.size()));
    s.groups = g;
    return s;
}

// correlated 0/1 draws: a latent Gaussian per index shares a common factor
Table random_table(std::mt19937_64& gen, int t, int m) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::vector<double> loc(static_cast<std::size_t>(m));
    for (auto& v : loc) v = u(gen);
    Table out(static_cast<std::size_t>(t), std::vector<std::uint8_t>(static_cast<std::size_t>(m)));
    for (auto& row : out) {
        const double common = nd(gen);
        for (int i = 0; i < m; ++i) row[static_cast<std::size_t>(i)] = (loc[static_cast<std::size_t>(i)] + 0.8 * common + nd(gen)) > 0.0;
    }
    return out;
}

std::vector<std::vector<int>> random_groups(std::mt19937_64& gen, int m) {
    std::uniform_int_distribution<int> size(0, 3);
    std::uniform_int_distribution<int> pick(0, m - 1);
    std::vector<std::vector<int>> g(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        std::vector<int> members{i};
        const int extra = size(gen);
        for (int e = 0; e < extra; ++e) members.push_back(pick(gen));
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        g[static_cast<std::size_t>(i)] = members;
    }
    return g;
}

}  // namespace

TEST_CASE("indicator matrix") {
    Matrix psi(3, 2);
    psi << 1.5, -0.2, -1.0, 3.0, -1.01, 1.0;
    const auto ind = IndicatorMatrix::from_draws(psi);
    CHECK(ind(0, 0) == 1);
    CHECK(ind(1, 0) == 0);  // |psi| = 1 is in the null
    CHECK(ind(2, 0) == 1);
    CHECK(ind(2, 1) == 0);
    CHECK(ind.count(0) == 2);
    CHECK(ind.marginal()(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("group formation") {
    SUBCASE("identity gives singletons") {
        const auto g = form_groups(Matrix::Identity(3, 3));
        for (int i = 0; i < 3; ++i) CHECK(g.groups[static_cast<std::size_t>(i)] == std::vector<int>{i});
    }
    SUBCASE("one strong pair") {
        Matrix r = Matrix::Identity(3, 3);
        r(0, 1) = r(1, 0) = 0.9;
        const auto g = form_groups(r);
        // type-7 95th percentile of {0, 0, 0.9}
        CHECK(g.threshold_r == doctest::Approx(0.81));
        CHECK(g.groups[0] == std::vector<int>{0, 1});
        CHECK(g.groups[1] == std::vector<int>{0, 1});
        CHECK(g.groups[2] == std::vector<int>{2});
    }
    SUBCASE("cap of five neighbours") {
        Matrix r = Matrix::Constant(7, 7, 0.8);
        r.diagonal().setOnes();
        const auto g = form_groups(r);
        for (const auto& gi : g.groups) CHECK(gi.size() == 6);
        // ties go to the smaller index
        CHECK(g.groups[6] == std::vector<int>{0, 1, 2, 3, 4, 6});
        const auto self = form_groups(r, {.cap = 5, .percentile = 95.0, .cap_includes_self = true});
        for (const auto& gi : self.groups) CHECK(gi.size() == 5);
    }
    SUBCASE("largest correlations win") {
        Matrix r = Matrix::Identity(8, 8);
        for (int j = 1; j < 8; ++j) r(0, j) = r(j, 0) = 0.3 + 0.1 * j;
        const auto g = form_groups(r, {.cap = 2});
        CHECK(g.groups[0] == std::vector<int>{0, 6, 7});
    }
    SUBCASE("invariants on a random correlation matrix") {
        std::mt19937_64 gen(2);
        std::normal_distribution<double> nd;
        Matrix a(30, 5);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(gen);
        Matrix c = a * a.transpose() + Matrix::Identity(30, 30);
        const Vector s = c.diagonal().cwiseSqrt().cwiseInverse();
        const Matrix r = s.asDiagonal() * c * s.asDiagonal();
        const auto g = form_groups(r);
        for (int i = 0; i < 30; ++i) {
            const auto& gi = g.groups[static_cast<std::size_t>(i)];
            CHECK(std::find(gi.begin(), gi.end(), i) != gi.end());
            CHECK(gi.size() <= 6);
            for (int j : gi)
                if (j != i) CHECK(r(i, j) >= g.threshold_r);
        }
    }
    SUBCASE("too small") { CHECK_THROWS_AS(form_groups(Matrix::Identity(1, 1)), ValidationError); }
}

TEST_CASE("w from the hand-enumerated four draws") {
    const Table t{{1, 1}, {1, 0}, {0, 1}, {1, 1}};
    const auto ind = to_indicator(t);
    const auto groups = to_groups({{0, 1}, {0, 1}});
    const std::vector<std::uint8_t> d1{1, 1}, d0{1, 0};
    CHECK(compute_w(d1, ind, groups)(0) == 0.5);
    CHECK(compute_w(d0, ind, groups)(0) == 0.25);

    const auto single = GroupStructure::singletons(2);
    CHECK(compute_w(d1, ind, single)(0) == 0.75);

    // coupled pair at beta = 0.3 against the four-configuration enumeration
    const auto got = optimize_decisions(ind, groups, 0.3);
    const auto bf = oracle::brute_force(t, groups.groups, 0.3);
    CHECK(got.d == bf.d);
    CHECK(got.objective == bf.objective);
}

TEST_CASE("singleton groups reduce to marginal thresholding") {
    std::mt19937_64 gen(12);
    for (int rep = 0; rep < 20; ++rep) {
        const Table t = random_table(gen, 50, 10);
        const auto ind = to_indicator(t);
        const auto g = GroupStructure::singletons(10);
        for (double beta : {0.1, 0.34, 0.5, 0.9}) {
            const auto r = optimize_decisions(ind, g, beta);
            for (int i = 0; i < 10; ++i) CHECK(r.d[static_cast<std::size_t>(i)] == (ind.marginal()(i) > beta ? 1 : 0));
        }
        // exact equality v_i == beta is not a rejection
        const double v0 = static_cast<double>(ind.count(0)) / 50.0;
        CHECK(optimize_decisions(ind, g, v0).d[0] == 0);
    }
}

TEST_CASE("optimizer equals brute force on random instances") {
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> msize(2, 10);
    std::uniform_real_distribution<double> ub(0.05, 0.95);
    for (int rep = 0; rep < 40; ++rep) {
        const int m = msize(gen);
        const Table t = random_table(gen, 40, m);
        const auto groups = to_groups(random_groups(gen, m));
        const double beta = ub(gen);
        const auto got = optimize_decisions(to_indicator(t), groups, beta);
        const auto bf = oracle::brute_force(t, groups.groups, beta);
        CAPTURE(rep);
        CHECK(got.all_exact());
        CHECK(got.objective == bf.objective);
        CHECK(got.d == bf.d);
        CHECK(f_beta(got.d, to_indicator(t), groups, beta) == oracle::f_beta(t, groups.groups, got.d, beta));
    }
}

TEST_CASE("coordinate ascent beyond the enumeration limit") {
    std::mt19937_64 gen(5);
    for (int rep = 0; rep < 10; ++rep) {
        const int m = 12;
        const Table t = random_table(gen, 60, m);
        const auto groups = to_groups(random_groups(gen, m));
        const auto ind = to_indicator(t);
        OptimizerOptions opt;
        opt.component_enum_limit = 2;
        const auto got = optimize_decisions(ind, groups, 0.4, opt);
        const auto bf = oracle::brute_force(t, groups.groups, 0.4);
        CHECK(got.objective <= bf.objective);
        // no single flip improves the returned decision
        for (int i = 0; i < m; ++i) {
            auto d = got.d;
            d[static_cast<std::size_t>(i)] ^= 1;
            CHECK(f_beta(d, ind, groups, 0.4) <= got.objective);
        }
        opt.threads = 4;
        CHECK(optimize_decisions(ind, groups, 0.4, opt).d == got.d);
    }
}

TEST_CASE("large beta rejects nothing") {
    std::mt19937_64 gen(3);
    const Table t = random_table(gen, 30, 6);
    const auto r = optimize_decisions(to_indicator(t), to_groups(random_groups(gen, 6)), 0.999999);
    CHECK(r.rejections() == 0);
    CHECK(r.objective == 0.0);
}

TEST_CASE("w never exceeds the marginal probability") {
    std::mt19937_64 gen(8);
    for (int rep = 0; rep < 20; ++rep) {
        const Table t = random_table(gen, 30, 7);
        const auto ind = to_indicator(t);
        const auto groups = to_groups(random_groups(gen, 7));
        for (std::uint32_t mask = 0; mask < 128; ++mask) {
            std::vector<std::uint8_t> d(7);
            for (int i = 0; i < 7; ++i) d[static_cast<std::size_t>(i)] = (mask >> i) & 1U;
            const Vector w = compute_w(d, ind, groups);
            CHECK((w.array() <= ind.marginal().array()).all());
        }
    }
}

TEST_CASE("posterior FDR and FNR") {
    Vector v(3);
    v << 0.9, 0.5, 1.0;
    const std::vector<std::uint8_t> none{0, 0, 0}, one{1, 0, 0}, all{1, 1, 1};
    CHECK(posterior_fdr(none, v) == 0.0);
    CHECK(posterior_fdr(one, v) == doctest::Approx(0.1));
    CHECK(posterior_fnr(one, v) == doctest::Approx(0.75));
    const Vector ones = Vector::Ones(3);
    CHECK(posterior_fdr(all, ones) == 0.0);
    CHECK(posterior_fnr(all, ones) == 0.0);
    // adding a certain discovery never raises the FDR
    const std::vector<std::uint8_t> two{1, 0, 1};
    CHECK(posterior_fdr(two, v) <= posterior_fdr(one, v));
}

TEST_CASE("beta calibration") {
    SUBCASE("all hypotheses certain") {
        const Table t(20, std::vector<std::uint8_t>(5, 1));
        const auto r = calibrate_beta(to_indicator(t), GroupStructure::singletons(5));
        CHECK(std::count(r.d.begin(), r.d.end(), 1) == 5);
        CHECK(r.fdr == 0.0);
        CHECK(r.status == CalibrationStatus::below_target);
    }
    SUBCASE("a single v = 0.85 hypothesis is not admissible") {
        Table t(20, std::vector<std::uint8_t>(1, 0));
        for (int i = 0; i < 17; ++i) t[static_cast<std::size_t>(i)][0] = 1;
        // m = 1 needs a group structure of one singleton
        const auto r = calibrate_beta(to_indicator(t), GroupStructure::singletons(1));
        CHECK(std::count(r.d.begin(), r.d.end(), 1) == 0);
        CHECK(r.status == CalibrationStatus::no_admissible);
        CHECK(to_string(r.status) == "no_admissible");
    }
    SUBCASE("planted signals hit the target band") {
        // 40 nulls with small v, 20 signals; FDR 0.10 needs a mix
        std::mt19937_64 gen(4);
        std::uniform_real_distribution<double> u;
        const int t_draws = 1000, m = 60;
        std::vector<double> p(m);
        for (int i = 0; i < m; ++i) p[static_cast<std::size_t>(i)] = i < 20 ? 0.75 + 0.25 * u(gen) : 0.6 * u(gen);
        Table t(t_draws, std::vector<std::uint8_t>(m));
        for (auto& row : t)
            for (int i = 0; i < m; ++i) row[static_cast<std::size_t>(i)] = u(gen) < p[static_cast<std::size_t>(i)];
        const auto r = calibrate_beta(to_indicator(t), GroupStructure::singletons(m));
        CHECK(r.status == CalibrationStatus::within_tolerance);
        CHECK(std::abs(r.fdr - 0.10) <= 0.005);
        CHECK(r.fdr == doctest::Approx(posterior_fdr(r.d, to_indicator(t).marginal())));
        CHECK(r.evaluated.size() >= 40);
        // the chosen decision has the most rejections among admissible evaluations
        for (const auto& e : r.evaluated)
            if (e.fdr <= 0.105 && e.rejections > 0) CHECK(e.rejections <= std::count(r.d.begin(), r.d.end(), 1));
    }
}

TEST_CASE("Bayes factors") {
    auto make = [](int t, int hits) {
        Table tab(static_cast<std::size_t>(t), std::vector<std::uint8_t>(1, 0));
        for (int i = 0; i < hits; ++i) tab[static_cast<std::size_t>(i)][0] = 1;
        return to_indicator(tab);
    };
    CHECK(bayes_factors(make(10, 5), make(10, 5)).value(0) == doctest::Approx(1.0));
    CHECK(bayes_factors(make(10, 9), make(10, 5)).value(0) == doctest::Approx(9.0));

    const auto clipped = bayes_factors(make(100, 100), make(1000, 500));
    CHECK(clipped.posterior_clip == doctest::Approx(0.005));
    CHECK(clipped.posterior_clipped[0]);
    CHECK(clipped.value(0) == doctest::Approx(0.995 / 0.005));
    CHECK(format_bayes_factor(clipped.value(0)) == ">100");
    CHECK(format_bayes_factor(9.0) == "9");
    CHECK(format_bayes_factor(0.012345) == "0.0123");
    CHECK(format_bayes_factor(12.345) == "12.3");

    const auto degenerate = bayes_factors(make(100, 50), make(1000, 0));
    CHECK(degenerate.prior_degenerate[0]);
    CHECK(std::isfinite(degenerate.value(0)));
}

TEST_CASE("Bayes factor is stable across chain halves") {
    Rng rng = make_stream(6, 0);
    const int t = 20000;
    Matrix psi(t, 3);
    for (int r = 0; r < t; ++r) {
        psi(r, 0) = 1.2 + 0.3 * std_normal(rng);
        psi(r, 1) = 0.5 + 0.6 * std_normal(rng);
        psi(r, 2) = -0.9 + 0.4 * std_normal(rng);
    }
    Matrix prior(t, 3);
    for (int r = 0; r < t; ++r)
        for (int i = 0; i < 3; ++i) prior(r, i) = 1.5 * std_normal(rng);
    const auto pri = IndicatorMatrix::from_draws(prior);
    const auto a = bayes_factors(IndicatorMatrix::from_draws(psi.topRows(t / 2)), pri);
    const auto b = bayes_factors(IndicatorMatrix::from_draws(psi.bottomRows(t / 2)), pri);
    const auto ia = IndicatorMatrix::from_draws(psi.topRows(t / 2));
    for (int i = 0; i < 3; ++i) {
        const double p = ia.marginal()(i);
        // log-odds standard error of each half; both halves share the prior
        const double se = std::sqrt(2.0 / ((t / 2.0) * p * (1.0 - p)));
        CHECK(std::abs(std::log(a.value(i)) - std::log(b.value(i))) < 3.0 * se);
    }
}

TEST_CASE("decision report") {
    Matrix psi(4, 3);
    psi << -2.0, 0.1, 1.5, -2.2, 0.2, 1.6, -1.8, -0.1, 1.4, -2.1, 0.0, 1.7;
    CalibrationResult cal;
    cal.beta = 0.5;
    cal.d = {1, 0, 1};
    cal.fdr = 0.0;
    cal.fnr = 0.0;
    cal.status = CalibrationStatus::within_tolerance;
    const auto ind = IndicatorMatrix::from_draws(psi);
    const auto bf = bayes_factors(ind, ind);
    const std::vector<std::string> names{"a", "b", "c"};
    auto groups = GroupStructure::singletons(3);
    groups.groups[0] = {0, 2};
    const auto rep = build_decision_report(names, psi, cal, groups, bf);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].direction == "Up");
    CHECK(rep.rows[1].direction == "-");
    CHECK(rep.rows[2].direction == "Down");
    CHECK(rep.rows[0].psi_hat == doctest::Approx(-2.025));
    CHECK(rep.rows[0].ci_low <= rep.rows[0].ci_high);
    CHECK(rep.rows[0].group_members == std::vector<std::string>{"a", "c"});
    CHECK(rep.n_discoveries == 2);

    testutil::TempDir dir("report");
    write_decision_csv(dir / "d.csv", rep);
    write_decision_summary_json(dir / "d.json", rep);
    const auto csv = testutil::read_text(dir / "d.csv");
    CHECK(csv.rfind("mirna,decision,direction,psi_hat,ci_low,ci_high,bayes_factor,group_members\n", 0) == 0);
    CHECK(csv.find("a;c") != std::string::npos);
    const auto json = testutil::read_text(dir / "d.json");
    for (const char* key : {"beta", "posterior_fdr", "posterior_fnr", "n_discoveries"})
        CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
}
