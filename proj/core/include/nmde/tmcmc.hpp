#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nmde/linalg.hpp"
#include "nmde/rng.hpp"

namespace nmde {

using LogTarget = std::function<double(const Vector&)>;

struct SamplerConfig {
    long n_iterations = 200000;
    long burn_in = 50000;
    long thin = 10;
    std::uint64_t seed = 20240101;
    double accept_low = 0.20;
    double accept_high = 0.35;
    long adaptation_window = 100;
    bool adapt = true;

    /// Throws ValidationError when burn_in >= n_iterations (unless both are
    /// zero), thin < 1, the band is not inside (0, 1) or the window is < 1.
    void validate() const;
    [[nodiscard]] long expected_draws() const { return n_iterations > burn_in ? (n_iterations - burn_in) / thin : 0; }
};

/// Contiguous coordinate range moved together by one additive TMCMC step and
/// sharing one adapted scale factor.
struct Block {
    std::string name;
    Eigen::Index begin = 0;
    Eigen::Index size = 0;
};

struct StepResult {
    bool accepted = false;
    double log_target = 0.0;
    double epsilon = 0.0;
};

/// Additive TMCMC proposal x*_i = x_i + b_i c_i eps over [begin, begin+size).
Vector tmcmc_proposal(const Vector& x, const Vector& scales, double epsilon, std::span<const int> signs,
                      Eigen::Index begin, Eigen::Index size);

/// min(1, exp(proposal - current)); 0 when the proposal is not finite.
double tmcmc_acceptance(double current_log_target, double proposal_log_target);

/// One additive TMCMC move: eps ~ N(0,1) truncated to eps > 0, independent
/// Rademacher signs, every coordinate of the range moved by +-c_i eps, accepted
/// with probability min(1, pi(x*)/pi(x)). The move is its own inverse under a
/// sign flip, so no Jacobian enters. On acceptance `x` is updated in place.
StepResult tmcmc_step(Vector& x, double current_log_target, const Vector& scales, const LogTarget& log_target,
                      Rng& rng, Eigen::Index begin = 0, Eigen::Index size = -1);

struct BlockStats {
    std::string name;
    long proposals = 0;  // after burn-in
    long accepted = 0;   // after burn-in
    double final_factor = 1.0;
    double last_window_rate = 0.0;
    bool in_band = false;  // post-burn-in acceptance inside the band

    [[nodiscard]] double acceptance_rate() const {
        return proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
    }
};

/// Robbins-Monro multiplicative adaptation of one factor per block. After
/// every window the log factor moves by gain_k (rate - band centre), with
/// gain_k = 2 / sqrt(k) for the k-th window.
class ScaleAdapter {
public:
    ScaleAdapter(std::size_t blocks, double accept_low, double accept_high, long window);

    void record(std::size_t block, bool accepted);
    /// Closes the window if it is full; returns true when factors changed.
    bool end_iteration();

    [[nodiscard]] double factor(std::size_t block) const { return std::exp(log_factor_[block]); }
    [[nodiscard]] double last_rate(std::size_t block) const { return last_rate_[block]; }
    [[nodiscard]] bool in_band(std::size_t block) const;
    void set_log_factor(std::size_t block, double v) { log_factor_[block] = v; }

private:
    double low_;
    double high_;
    long window_;
    long filled_ = 0;
    long windows_done_ = 0;
    std::vector<double> log_factor_;
    std::vector<long> window_accepts_;
    std::vector<double> last_rate_;
};

struct ChainResult {
    Matrix draws;                  // one row per stored draw
    std::vector<double> log_targets;
    std::vector<BlockStats> blocks;
    Vector scales;                 // per-coordinate scales in force after burn-in
    std::vector<std::string> warnings;
    long burn_in = 0;
    long thin = 1;

    [[nodiscard]] double acceptance_rate() const;
};

/// Runs the chain: each iteration applies one additive TMCMC step per block in
/// order. During burn-in the block factors adapt toward the acceptance band;
/// afterwards scales are frozen and every `thin`-th state is stored. Chain
/// `chain_index` draws from RNG stream `chain_index` of `config.seed`.
/// Throws NumericalError if the initial state has a non-finite target.
ChainResult run_chain(const LogTarget& log_target, Vector x0, const Vector& relative_scales,
                      std::vector<Block> blocks, const SamplerConfig& config, std::uint64_t chain_index = 0);

/// Burn-in only: returns the adapted per-coordinate scales.
Vector tune_scales(const LogTarget& log_target, Vector x0, const Vector& initial_scales, std::vector<Block> blocks,
                   const SamplerConfig& config, std::vector<std::string>* warnings = nullptr);

/// Effective sample size by Geyer's initial monotone sequence estimator. A
/// constant chain returns 1.
double effective_sample_size(std::span<const double> chain);

struct ParameterDiagnostics {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double ess = 0.0;
};

std::vector<ParameterDiagnostics> diagnostics(const Matrix& draws, std::span<const std::string> names);

/// Trace export `iteration,parameter,value`. Draw t is labelled with the
/// sampler iteration that produced it: burn_in + (t + 1) * thin.
void write_trace_csv(const std::filesystem::path& path, const Matrix& draws, std::span<const std::string> names,
                     std::span<const int> columns, long burn_in, long thin);

}  // namespace nmde
