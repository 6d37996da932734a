#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmde/posterior.hpp"
#include "nmde/tmcmc.hpp"

namespace nmde {

/// blocked: one additive TMCMC move per block (psi, the hyperparameters of
/// each strand, delta^2) each iteration, with a scale factor adapted per block.
/// joint: a single move over all coordinates with one adapted factor.
enum class UpdateMode { blocked, joint };

/// Thinned posterior draws in sampler coordinates (see ModelState::pack).
struct PosteriorSamples {
    int m = 0;
    int k = 0;
    std::vector<std::string> parameter_names;
    Matrix draws;
    std::vector<BlockStats> blocks;
    std::vector<std::string> warnings;
    long burn_in = 0;
    long thin = 1;

    [[nodiscard]] long size() const { return static_cast<long>(draws.rows()); }
    [[nodiscard]] double acceptance_rate() const;
    [[nodiscard]] ModelState state(long t) const;
    /// T x m matrix of psi draws.
    [[nodiscard]] Matrix psi_draws() const { return draws.leftCols(m); }
    [[nodiscard]] Vector delta2_draws() const { return draws.col(ModelState::delta2_index(m, k)).array().exp(); }
    /// Column index of a parameter name; -1 if absent.
    [[nodiscard]] int column(const std::string& name) const;
};

std::vector<std::string> parameter_names(std::span<const std::string> mirna_names,
                                         const GenomeAnnotation& annotation);

/// psi = column means of z, hyperparameters at their prior modes, delta^2 at
/// its prior mean (mode if the mean does not exist).
ModelState default_initial_state(const PosteriorModel& model);

/// Relative per-coordinate scales from prior standard deviations: sqrt of the
/// prior variance of psi_i at the modal hyperparameters, and the prior standard
/// deviation of each log parameter.
Vector default_relative_scales(const PosteriorModel& model);

std::vector<Block> sampler_blocks(const GenomeAnnotation& annotation, int m, UpdateMode mode);

PosteriorSamples run_posterior_chain(const PosteriorModel& model, const SamplerConfig& config,
                                     UpdateMode mode = UpdateMode::blocked,
                                     const std::optional<ModelState>& initial = std::nullopt,
                                     std::uint64_t chain_index = 0);

/// Independent chains on separate RNG streams, run concurrently.
std::vector<PosteriorSamples> run_posterior_chains(const PosteriorModel& model, const SamplerConfig& config,
                                                   int chains, int threads, UpdateMode mode = UpdateMode::blocked);

/// Concatenates draws of several chains (metadata from the first).
PosteriorSamples merge_chains(const std::vector<PosteriorSamples>& chains);

}  // namespace nmde
