#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nmde/data_ingest.hpp"
#include "nmde/rng.hpp"

namespace nmde {

/// Gaussian likelihood-ratio statistic for H0: |psi| <= 1 on one column.
struct LrResult {
    double zeta = 1.0;
    double p_value = 1.0;
    double psi_hat = 0.0;      // sample mean
    double sigma2_hat = 0.0;   // biased variance
    double psi0 = 0.0;         // clamp(mean, -1, 1)
    double sigma2_0 = 0.0;     // (1/n) sum (z - psi0)^2
};

/// zeta = (sigma2_hat / sigma2_0)^(n/2); equals 1 iff |mean| <= 1.
LrResult lr_stat(std::span<const double> z);

/// Where the null data are simulated.
enum class NullPoint {
    boundary,         // psi = sign(mean) (the closest null point to the alternative), variance sigma2_0
    constrained_mle,  // (psi0, sigma2_0)
};

struct BootstrapOptions {
    int replicates = 10000;
    NullPoint null_point = NullPoint::boundary;
    /// Count replicates tied with the observed statistic with a uniform weight
    /// instead of zero.
    bool randomize_ties = true;
};

/// p = (1 + #{zeta* < zeta_obs} + U #{zeta* = zeta_obs}) / (B + 1), with U = 0
/// when ties are not randomized.
double bootstrap_pvalue(std::span<const double> z, const BootstrapOptions& options, Rng& rng);
double bootstrap_pvalue(std::span<const double> z, const BootstrapOptions& options, std::uint64_t seed,
                        std::uint64_t stream = 0);

/// Benjamini-Hochberg step-up at level q (stable ordering on ties).
std::vector<bool> bh_adjust(std::span<const double> p, double q = 0.10);

/// One-sided t-test on the side of the sample median: H0 psi <= 1 against
/// psi > 1 when the median is positive, H0 psi >= -1 against psi < -1 otherwise.
double median_sign_pvalue(std::span<const double> z);

enum class LrbhMethod { lr_bootstrap, median_sign };

struct LrbhOptions {
    BootstrapOptions bootstrap;
    double q = 0.10;
    LrbhMethod method = LrbhMethod::lr_bootstrap;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct LrbhReport {
    std::vector<std::string> mirna_names;
    std::vector<LrResult> results;
    std::vector<bool> rejected;
    LrbhMethod method = LrbhMethod::lr_bootstrap;

    [[nodiscard]] int n_rejected() const;
};

/// Per-miRNA tests on z (miRNA i uses RNG stream i), then BH across miRNAs.
LrbhReport run_lrbh(const ExpressionDataset& data, const LrbhOptions& options = {});

void write_lrbh_csv(const std::filesystem::path& path, const LrbhReport& report);

}  // namespace nmde
