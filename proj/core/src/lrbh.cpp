#include "nmde/lrbh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "lrbh_baseline";

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // biased
};

Moments moments(std::span<const double> z) {
    Moments m;
    const auto n = static_cast<double>(z.size());
    for (double v : z) m.mean += v;
    m.mean /= n;
    for (double v : z) m.var += (v - m.mean) * (v - m.mean);
    m.var /= n;
    return m;
}

// Statistic from the mean and biased variance alone: sum (z - c)^2 / n = var + (mean - c)^2.
double zeta_from(double mean, double var, std::size_t n) {
    if (std::abs(mean) <= 1.0) return 1.0;
    const double d = std::abs(mean) - 1.0;
    const double var0 = var + d * d;
    return std::exp(0.5 * static_cast<double>(n) * (std::log(var) - std::log(var0)));
}

}  // namespace

LrResult lr_stat(std::span<const double> z) {
    if (z.size() < 2) throw ValidationError(kModule, "need at least two observations");
    for (double v : z) {
        if (!std::isfinite(v)) throw ValidationError(kModule, "observations must be finite");
    }
    const auto mo = moments(z);
    if (!(mo.var > 0.0)) throw ValidationError(kModule, "zero sample variance");
    LrResult r;
    r.psi_hat = mo.mean;
    r.sigma2_hat = mo.var;
    r.psi0 = std::clamp(mo.mean, -1.0, 1.0);
    r.sigma2_0 = mo.var + (mo.mean - r.psi0) * (mo.mean - r.psi0);
    r.zeta = zeta_from(mo.mean, mo.var, z.size());
    return r;
}

double bootstrap_pvalue(std::span<const double> z, const BootstrapOptions& options, Rng& rng) {
    if (options.replicates < 0) throw ValidationError(kModule, "bootstrap replicates must be nonnegative");
    const auto obs = lr_stat(z);
    const double centre = options.null_point == NullPoint::boundary ? (obs.psi_hat < 0.0 ? -1.0 : 1.0) : obs.psi0;
    const double sd = std::sqrt(obs.sigma2_0);
    const std::size_t n = z.size();

    long below = 0, ties = 0;
    std::vector<double> sample(n);
    for (int b = 0; b < options.replicates; ++b) {
        for (auto& v : sample) v = centre + sd * std_normal(rng);
        const auto mo = moments(sample);
        const double zeta = mo.var > 0.0 ? zeta_from(mo.mean, mo.var, n) : 1.0;
        if (zeta < obs.zeta) {
            ++below;
        } else if (zeta == obs.zeta) {
            ++ties;
        }
    }
    const double u = options.randomize_ties ? uniform01(rng) : 0.0;
    return (1.0 + static_cast<double>(below) + u * static_cast<double>(ties)) / (options.replicates + 1.0);
}

double bootstrap_pvalue(std::span<const double> z, const BootstrapOptions& options, std::uint64_t seed,
                        std::uint64_t stream) {
    Rng rng = make_stream(seed, stream);
    return bootstrap_pvalue(z, options, rng);
}

std::vector<bool> bh_adjust(std::span<const double> p, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError(kModule, "BH level must lie in (0, 1]");
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(kModule, "p-values must lie in [0, 1]");
    }
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (p[order[i]] <= static_cast<double>(i + 1) * q / static_cast<double>(m)) k = i + 1;
    }
    std::vector<bool> rejected(m, false);
    for (std::size_t i = 0; i < k; ++i) rejected[order[i]] = true;
    return rejected;
}

double median_sign_pvalue(std::span<const double> z) {
    if (z.size() < 2) throw ValidationError(kModule, "need at least two observations");
    std::vector<double> s(z.begin(), z.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    const auto mo = moments(z);
    const double sd = std::sqrt(mo.var * static_cast<double>(n) / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw ValidationError(kModule, "zero sample variance");
    const double se = sd / std::sqrt(static_cast<double>(n));
    boost::math::students_t dist(static_cast<double>(n - 1));
    if (median > 0.0) return boost::math::cdf(boost::math::complement(dist, (mo.mean - 1.0) / se));
    return boost::math::cdf(dist, (mo.mean + 1.0) / se);
}

int LrbhReport::n_rejected() const { return static_cast<int>(std::count(rejected.begin(), rejected.end(), true)); }

LrbhReport run_lrbh(const ExpressionDataset& data, const LrbhOptions& options) {
    const int m = data.m();
    if (m < 1) throw ValidationError(kModule, "no miRNAs");
    LrbhReport rep;
    rep.mirna_names = data.mirna_names;
    rep.method = options.method;
    rep.results.resize(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), options.threads, [&](std::size_t i) {
        const auto col = data.z.col(static_cast<Eigen::Index>(i));
        std::vector<double> z(col.data(), col.data() + col.size());
        auto r = lr_stat(z);
        r.p_value = options.method == LrbhMethod::median_sign ? median_sign_pvalue(z)
                                                              : bootstrap_pvalue(z, options.bootstrap, options.seed, i);
        rep.results[i] = r;
    });
    std::vector<double> p;
    for (const auto& r : rep.results) p.push_back(r.p_value);
    rep.rejected = bh_adjust(p, options.q);
    return rep;
}

void write_lrbh_csv(const std::filesystem::path& path, const LrbhReport& report) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "mirna,zeta,p_value,rejected\n";
    for (std::size_t i = 0; i < report.results.size(); ++i) {
        out << report.mirna_names[i] << ',' << csv::format_number(report.results[i].zeta) << ','
            << csv::format_number(report.results[i].p_value) << ',' << (report.rejected[i] ? 1 : 0) << '\n';
    }
}

}  // namespace nmde
