#include <doctest.h>

#include "nmde/errors.hpp"
#include "nmde/samples_io.hpp"
#include "nmde/tmcmc.hpp"
#include "test_util.hpp"

using namespace nmde;

TEST_CASE("FNV-1a reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config hash") {
    const std::map<std::string, std::string> a{{"x.a", "1"}, {"x.b", "two"}};
    auto b = a;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b["x.b"] = "three";
    CHECK(config_hash(a) != config_hash(b));
    // key=value framing keeps shifted boundaries apart
    CHECK(config_hash({{"k", "ab"}}) != config_hash({{"ka", "b"}}));
}

TEST_CASE("samples round trip is bit identical") {
    PosteriorSamples s;
    s.m = 2;
    s.k = 1;
    s.parameter_names = {"psi[a]", "psi[b]", "log_varrho2[chr1+]", "log_nu[chr1+]", "log_rho[chr1+]", "log_delta2"};
    s.draws.resize(3, 6);
    for (Eigen::Index i = 0; i < s.draws.size(); ++i) s.draws.data()[i] = std::sin(1.0 + static_cast<double>(i)) * 1e3 / 7.0;
    s.draws(1, 1) = 5e-324;
    s.burn_in = 10;
    s.thin = 3;
    testutil::TempDir dir("io");
    write_samples(dir / "s.csv", s);
    const auto r = read_samples(dir / "s.csv");
    CHECK(r.m == 2);
    CHECK(r.k == 1);
    CHECK(r.burn_in == 10);
    CHECK(r.thin == 3);
    CHECK(r.parameter_names == s.parameter_names);
    CHECK(r.draws == s.draws);
    write_samples(dir / "t.csv", r);
    CHECK(testutil::read_text(dir / "s.csv") == testutil::read_text(dir / "t.csv"));
}

TEST_CASE("empty sample files are valid") {
    PosteriorSamples s;
    s.m = 1;
    s.k = 1;
    s.parameter_names = {"psi[a]", "log_varrho2[c+]", "log_nu[c+]", "log_rho[c+]", "log_delta2"};
    s.draws.resize(0, 5);
    testutil::TempDir dir("io");
    write_samples(dir / "s.csv", s);
    const auto r = read_samples(dir / "s.csv");
    CHECK(r.size() == 0);
    CHECK(r.draws.cols() == 5);
}

TEST_CASE("malformed sample files") {
    testutil::TempDir dir("io");
    testutil::write_text(dir / "a.csv", "not a header\n");
    CHECK_THROWS_AS(read_samples(dir / "a.csv"), ValidationError);
    testutil::write_text(dir / "b.csv", "nmde-samples 1 1 0 2 0 1\npsi[a]\n1\n");
    CHECK_THROWS_AS(read_samples(dir / "b.csv"), ValidationError);
    CHECK_THROWS_AS(read_samples(dir / "missing.csv"), ValidationError);
}

TEST_CASE("trace export") {
    Matrix d(2, 2);
    d << 1.5, 2.0, 3.0, 4.25;
    const std::vector<std::string> names{"a", "b"};
    const std::vector<int> cols{1};
    testutil::TempDir dir("io");
    write_trace_csv(dir / "t.csv", d, names, cols, 100, 5);
    CHECK(testutil::read_text(dir / "t.csv") == "iteration,parameter,value\n105,b,2\n110,b,4.25\n");
}
