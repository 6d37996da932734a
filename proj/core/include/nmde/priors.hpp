#pragma once

#include <vector>

#include "nmde/data_ingest.hpp"
#include "nmde/linalg.hpp"
#include "nmde/matern.hpp"
#include "nmde/rng.hpp"

namespace nmde {

/// Inverse-gamma law with density b^a / Gamma(a) x^{-a-1} e^{-b/x}.
struct InverseGamma {
    double shape = 3.0;
    double scale = 2.0;

    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double mode() const { return scale / (shape + 1.0); }
    [[nodiscard]] double mean() const;      // requires shape > 1
    [[nodiscard]] double variance() const;  // requires shape > 2
    double draw(Rng& rng) const { return inverse_gamma_draw(rng, shape, scale); }
};

/// Log-normal law: log X ~ N(location, scale^2).
struct LogNormal {
    double location = 0.0;
    double scale = 1.0;

    [[nodiscard]] double log_pdf(double x) const;
    [[nodiscard]] double mode() const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;
    double draw(Rng& rng) const { return lognormal_draw(rng, location, scale); }
};

/// Inverse-gamma (shape, scale) with the given mode and variance. The
/// variance decreases monotonically in shape on (2, inf), so a bracketed
/// root search on log-variance finds the unique solution. The result is
/// forward-checked to 1e-8 relative error.
InverseGamma solve_ig(double mode, double variance);

/// Log-normal (location, scale) with the given mode and variance; solves for
/// s^2 in log space, location = log(mode) + s^2. Forward-checked to 1e-8.
LogNormal solve_lognormal(double mode, double variance);

/// Inverse-gamma prior for delta^2 by matching the mean and variance of the
/// per-miRNA sample variances of z (both with the n-1 / m-1 divisor). Falls
/// back to (3, 2 * mean) when the variance match is infeasible.
InverseGamma empirical_bayes_delta2(const Matrix& z);

/// How "variance" in the correlation-length prior is read.
enum class RhoVarianceScale { natural, log };
/// Whether the inverse-gamma process-variance prior is on varrho^2 or varrho.
enum class VarrhoPriorOn { varrho2, varrho };

struct PriorSettings {
    double varrho_mode = 1.0;
    double varrho_variance = 100.0;
    double nu_mode = 1.0;
    double nu_variance = 100.0;
    double rho_variance = 1000.0;
    RhoVarianceScale rho_variance_scale = RhoVarianceScale::natural;
    VarrhoPriorOn varrho_prior_on = VarrhoPriorOn::varrho2;
};

/// All hyperprior laws of the model plus the inverse-Wishart degrees of
/// freedom (number of miRNAs + 3).
struct HyperPriorSpec {
    InverseGamma varrho;
    VarrhoPriorOn varrho_on = VarrhoPriorOn::varrho2;
    LogNormal nu;
    std::vector<LogNormal> rho;  // one per strand
    InverseGamma delta2;
    double dof = 4.0;

    [[nodiscard]] int k() const { return static_cast<int>(rho.size()); }

    [[nodiscard]] double log_prior_varrho2(double varrho2) const;
    [[nodiscard]] double log_prior_strand(int strand, const StrandHyperParams& h) const;
    [[nodiscard]] double log_prior_delta2(double value) const { return delta2.log_pdf(value); }

    [[nodiscard]] StrandHyperParams draw_strand(int strand, Rng& rng) const;
    [[nodiscard]] std::vector<StrandHyperParams> draw_hypers(Rng& rng) const;
    /// Prior modes (used as the default initial state).
    [[nodiscard]] StrandHyperParams mode_strand(int strand) const;
    [[nodiscard]] double varrho2_mode() const;
};

/// Strand hyperpriors only; delta2 and dof are left at their defaults.
HyperPriorSpec make_strand_priors(const GenomeAnnotation& annotation, const PriorSettings& settings = {});

HyperPriorSpec make_hyperprior_spec(const GenomeAnnotation& annotation, const Matrix& z,
                                    const PriorSettings& settings = {});

}  // namespace nmde
