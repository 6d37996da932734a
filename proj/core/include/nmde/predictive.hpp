#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmde/data_ingest.hpp"
#include "nmde/model_sampler.hpp"
#include "nmde/rng.hpp"

namespace nmde {

/// Sigma ~ inverse-Wishart(dof, scale), density proportional to
/// |Sigma|^{-(dof+m+1)/2} exp(-tr(scale Sigma^{-1}) / 2), via the Bartlett
/// decomposition. Requires dof > m - 1.
Matrix sample_inverse_wishart(double dof, const Matrix& scale, Rng& rng);

/// Composition sampling of the posterior predictive for a new row: for each
/// (psi, delta^2) draw t, Sigma ~ IW(dof + n, delta^2 I + S) with
/// S = sum_j (z_j - psi)(z_j - psi)' over the rows of `z_train`, then
/// z_new ~ N(psi, Sigma). Returns one row per draw.
Matrix predictive_draws(const Matrix& z_train, const Matrix& psi_draws, const Vector& delta2_draws, double dof,
                        Rng& rng);

struct PredictiveSummary {
    std::string held_out_patient;
    std::vector<std::string> mirna_names;
    Vector low;
    Vector high;
    Vector observed;
    std::vector<bool> covered;
    double coverage = 0.0;
    bool ok = true;
    std::string error;
    double acceptance_rate = 0.0;
};

/// Central `level` interval of each predictive column and coverage of `observed`.
PredictiveSummary summarize_predictive(const Matrix& draws, const Vector& observed, double level = 0.75);

struct FoldConfig {
    GenomeAnnotation annotation;
    PriorSettings priors;
    JitterPolicy jitter;
    SamplerConfig sampler;
    UpdateMode mode = UpdateMode::blocked;
    double level = 0.75;
};

/// Refits on all rows but `j` and summarizes the predictive at row j. A fold
/// whose chain fails is returned with ok = false and the error message.
PredictiveSummary loo_predictive(const ExpressionDataset& data, int j, const FoldConfig& config);

/// All n folds, run concurrently. Fold j uses chain stream j and predictive
/// stream n + j of the sampler seed.
std::vector<PredictiveSummary> loo_all(const ExpressionDataset& data, const FoldConfig& config, int threads,
                                       std::optional<std::vector<int>> folds = std::nullopt);

/// Fraction of covered cells over every successful fold.
double overall_coverage(const std::vector<PredictiveSummary>& folds);

void write_fold_csv(const std::filesystem::path& path, const PredictiveSummary& fold);

}  // namespace nmde
