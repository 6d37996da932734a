#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "nmde/genome_model.hpp"
#include "nmde/linalg.hpp"
#include "nmde/priors.hpp"

namespace nmde {

/// Current values of psi, the per-strand hyperparameters and delta^2.
///
/// Positive parameters are held twice: on the log scale (canonical, what the
/// sampler moves) and as their exponentials. Both constructors derive the
/// positive values from the log values, so exp(log_x) == x holds exactly.
struct ModelState {
    Vector psi;
    Vector log_varrho2;
    Vector log_nu;
    Vector log_rho;
    double log_delta2 = 0.0;

    Vector varrho2;
    Vector nu;
    Vector rho;
    double delta2 = 1.0;

    static ModelState from_log(Vector psi, Vector log_varrho2, Vector log_nu, Vector log_rho, double log_delta2);
    static ModelState from_positive(Vector psi, std::span<const StrandHyperParams> hypers, double delta2);

    [[nodiscard]] int m() const { return static_cast<int>(psi.size()); }
    [[nodiscard]] int k() const { return static_cast<int>(log_rho.size()); }
    [[nodiscard]] StrandHyperParams hyper(int strand) const;
    [[nodiscard]] std::vector<StrandHyperParams> hypers() const;

    /// Sampler coordinates: psi, then (log varrho2, log nu, log rho) for each
    /// strand in turn, then log delta2.
    [[nodiscard]] Vector pack() const;
    static ModelState unpack(const Vector& x, int m, int k);
    [[nodiscard]] static int packed_size(int m, int k) { return m + 3 * k + 1; }
    [[nodiscard]] static int hyper_offset(int m, int strand) { return m + 3 * strand; }
    [[nodiscard]] static int delta2_index(int m, int k) { return m + 3 * k; }

    /// Sum of the log positive parameters: the log-Jacobian of the map from
    /// sampler coordinates to natural parameters.
    [[nodiscard]] double log_jacobian() const;
};

/// Everything the joint posterior depends on besides the state.
struct PosteriorModel {
    Matrix z;
    GenomeModel genome;
    HyperPriorSpec priors;
    JitterPolicy jitter;
    /// When false the data term is dropped and the target is the joint prior.
    bool likelihood_enabled = true;

    [[nodiscard]] int n() const { return static_cast<int>(z.rows()); }
    [[nodiscard]] int m() const { return static_cast<int>(z.cols()); }
    [[nodiscard]] int k() const { return genome.k(); }
};

/// Sigma-marginalized likelihood of Z given psi and delta^2, without the
/// dataset constant:
///   -mn log(delta) - (dof + n)/2 log|I_n + delta^{-2} (Z - M)(Z - M)'|,
/// with every row of M equal to psi'. The n x n determinant is used.
double log_marginal_likelihood(const Matrix& z, const Vector& psi, double delta2, double dof);

/// The dropped constant: log Gamma_m((dof+n)/2) - log Gamma_m(dof/2) - mn/2 log(pi).
/// Adding it gives the exact log density of Z under the matrix-t marginal.
double log_marginal_likelihood_constant(int m, int n, double dof);

/// log N(psi; 0, P W P') including the 2 pi and determinant terms. nullopt if
/// the covariance cannot be certified positive definite.
std::optional<double> log_psi_prior(const GenomeModel& genome, std::span<const StrandHyperParams> hypers,
                                    const Vector& psi, const JitterPolicy& jitter = {});

/// Joint log posterior (natural parameterization, no Jacobian) up to a
/// dataset constant: psi prior + marginal likelihood + hyperprior log
/// densities. Throws NumericalError on positive-definiteness failure.
double log_posterior(const ModelState& state, const PosteriorModel& model);

/// Posterior evaluator on sampler coordinates (log posterior + log-Jacobian).
/// Keeps the last two Cholesky factors of every independent prior block,
/// keyed by the hyperparameters of that block's strands, so a move that leaves
/// a strand unchanged never refactorizes its block. Not thread safe; give each
/// chain its own copy.
class PosteriorEvaluator {
public:
    explicit PosteriorEvaluator(const PosteriorModel& model);

    /// -inf when the state is invalid or any factorization fails.
    double operator()(const Vector& x);

    [[nodiscard]] const PosteriorModel& model() const { return *model_; }

private:
    struct Slot {
        Vector key;
        std::optional<CholeskyFactor> factor;
        bool filled = false;
    };
    struct BlockCache {
        std::array<Slot, 2> slots;
        int next = 0;
    };

    const CholeskyFactor* block_factor(std::size_t b, const Vector& x);

    const PosteriorModel* model_;
    Matrix zzt_;
    std::vector<BlockCache> blocks_;
    std::vector<StrandHyperParams> hypers_;
};

}  // namespace nmde
