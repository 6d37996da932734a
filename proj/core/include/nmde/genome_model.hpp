#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nmde/data_ingest.hpp"
#include "nmde/linalg.hpp"
#include "nmde/matern.hpp"
#include "nmde/priors.hpp"
#include "nmde/rng.hpp"

namespace nmde {

/// Matérn Gram matrix over one strand's coordinates, certified positive
/// definite by Cholesky. If factorization fails, diagonal jitter is escalated
/// per `policy` (relative to varrho2) and the amount written to `jitter_used`.
/// Throws NumericalError when the jitter budget is exhausted.
Matrix strand_cov(std::span<const double> coords, const StrandHyperParams& h, const JitterPolicy& policy = {},
                  double* jitter_used = nullptr);

/// Block-diagonal W (one block per strand, jitter already added) and the
/// induced prior covariance P W P' of psi.
struct PriorCovariance {
    std::vector<Matrix> w_blocks;
    Matrix psi_cov;
    double jitter_used = 0.0;  // largest jitter over all blocks
};

PriorCovariance prior_cov_psi(const GenomeAnnotation& annotation, const DesignMatrix& design,
                              std::span<const StrandHyperParams> hypers, const JitterPolicy& policy = {});

/// Cholesky factors of P W P' restricted to each independent miRNA block.
struct PsiPriorFactor {
    std::vector<CholeskyFactor> blocks;
    double log_det = 0.0;
    double jitter_used = 0.0;
};

/// Precomputed structure linking the annotation to psi. miRNAs that share no
/// strand, directly or through a chain of multi-locus miRNAs, are a priori
/// independent, so P W P' is block diagonal over `blocks()` and is assembled
/// and factorized block by block.
class GenomeModel {
public:
    GenomeModel(GenomeAnnotation annotation, const DesignMatrix& design);

    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] int k() const { return annotation_.k(); }
    [[nodiscard]] const GenomeAnnotation& annotation() const { return annotation_; }
    /// miRNA indices of each independent block, ascending.
    [[nodiscard]] const std::vector<std::vector<int>>& blocks() const { return block_members_; }

    /// Dense P W P' restricted to block `b` (local ordering = blocks()[b]).
    /// Returns nullopt if a strand Gram matrix cannot be certified.
    [[nodiscard]] std::optional<Matrix> block_cov(int b, std::span<const StrandHyperParams> hypers,
                                                  const JitterPolicy& policy, double* jitter_used = nullptr) const;

    /// Strands contributing to block `b`, ascending.
    [[nodiscard]] const std::vector<int>& block_strands(int b) const {
        return block_strands_[static_cast<std::size_t>(b)];
    }

    /// Cholesky factor of block_cov(b); nullopt on PD failure.
    [[nodiscard]] std::optional<CholeskyFactor> factor_block(int b, std::span<const StrandHyperParams> hypers,
                                                             const JitterPolicy& policy = {}) const;

    /// Factorizes every block; nullopt on any PD failure.
    [[nodiscard]] std::optional<PsiPriorFactor> factor(std::span<const StrandHyperParams> hypers,
                                                       const JitterPolicy& policy = {}) const;

    /// psi' (P W P')^{-1} psi using a factor from factor().
    [[nodiscard]] double quad_form(const PsiPriorFactor& f, const Vector& psi) const;

    /// One draw of psi ~ N(0, P W P').
    [[nodiscard]] Vector draw_psi(const PsiPriorFactor& f, Rng& rng) const;

private:
    GenomeAnnotation annotation_;
    int m_ = 0;
    std::vector<std::vector<double>> coords_;         // per strand
    std::vector<std::vector<int>> locus_mirna_;       // per strand, miRNA of each locus
    std::vector<std::vector<int>> block_members_;
    std::vector<std::vector<int>> block_strands_;
    std::vector<int> local_index_;                    // position of each miRNA inside its block
    std::vector<int> block_of_;                       // block of each miRNA
};

/// Callable producing one joint draw of all strand hyperparameters.
using HyperSampler = std::function<std::vector<StrandHyperParams>(Rng&)>;

struct CorrelationEstimate {
    Matrix r;
    int draws_used = 0;
    int draws_skipped = 0;
};

/// Monte Carlo estimate of the prior correlation matrix of psi: hyperparameters
/// are drawn `n_mc` times, each P W P' is converted to a correlation matrix and
/// the correlations are averaged entrywise. Draw t uses RNG stream t of `seed`,
/// and partial sums are reduced in a fixed order, so the result does not depend
/// on `threads`. Requires n_mc >= 1000; throws NumericalError if more than
/// 1% of draws fail PD.
CorrelationEstimate estimate_prior_correlation(const GenomeModel& model, const HyperSampler& sampler, int n_mc,
                                               std::uint64_t seed, int threads = 1,
                                               const JitterPolicy& policy = {});

CorrelationEstimate estimate_prior_correlation(const GenomeModel& model, const HyperPriorSpec& priors, int n_mc,
                                               std::uint64_t seed, int threads = 1,
                                               const JitterPolicy& policy = {});

/// `n` draws of psi from its marginal prior (hyperparameters drawn from their
/// priors), one row per draw. Draws whose covariance fails PD are redrawn.
Matrix draw_prior_psi(const GenomeModel& model, const HyperPriorSpec& priors, int n, std::uint64_t seed,
                      int threads = 1, const JitterPolicy& policy = {});

}  // namespace nmde
