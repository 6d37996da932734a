#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nmde/linalg.hpp"

namespace nmde {

/// r_i^(t) = 1{|psi_i^(t)| > threshold} for every draw t and miRNA i, with the
/// marginal posterior probabilities v_i = mean_t r_i^(t).
class IndicatorMatrix {
public:
    IndicatorMatrix() = default;
    IndicatorMatrix(int draws, int m, std::vector<std::uint8_t> bits);

    static IndicatorMatrix from_draws(const Matrix& psi_draws, double threshold = 1.0);

    [[nodiscard]] int draws() const { return draws_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] std::uint8_t operator()(int t, int i) const {
        return bits_[static_cast<std::size_t>(t) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(i)];
    }
    [[nodiscard]] const Vector& marginal() const { return marginal_; }
    /// Number of draws with r_i = 1.
    [[nodiscard]] long count(int i) const { return counts_[static_cast<std::size_t>(i)]; }

private:
    int draws_ = 0;
    int m_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<long> counts_;
    Vector marginal_;
};

struct GroupOptions {
    int cap = 5;
    double percentile = 95.0;
    /// When true, `cap` counts i itself; otherwise up to `cap` neighbours plus i.
    bool cap_includes_self = false;
};

struct GroupStructure {
    std::vector<std::vector<int>> groups;  // G_i, ascending, each contains i
    double threshold_r = 0.0;
    int cap = 5;
    bool cap_includes_self = false;

    [[nodiscard]] int m() const { return static_cast<int>(groups.size()); }
    /// Singleton groups for every index.
    static GroupStructure singletons(int m);
};

/// r = percentile of {r_ij : i < j} (linear interpolation); G_i = {i} plus the
/// indices j with the largest r_ij satisfying r_ij >= r and r_ij > 0, at most
/// `cap` of them (ties broken by smaller index).
GroupStructure form_groups(const Matrix& r, const GroupOptions& options = {});

/// w_i(d) = P(H_1i and r_j = d_j for all j in G_i \ {i} | data), estimated
/// from the indicator matrix. For singleton groups this is v_i.
Vector compute_w(std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups);

/// f_beta(d) = sum_i d_i (w_i(d) - beta), evaluated as S / T - beta * K where
/// S = sum_i d_i T w_i(d) is an exact integer count and K = sum_i d_i.
double f_beta(std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups, double beta);

struct OptimizerOptions {
    int component_enum_limit = 20;
    int restarts = 16;
    std::uint64_t seed = 7;
    int threads = 1;
};

struct ComponentSolution {
    std::vector<int> members;
    bool exact = true;
};

struct OptimizeResult {
    std::vector<std::uint8_t> d;
    double objective = 0.0;
    std::vector<ComponentSolution> components;

    [[nodiscard]] bool all_exact() const;
    [[nodiscard]] int rejections() const;
};

/// argmax_d f_beta(d). The dependence graph (edge i-j iff j in G_i or i in G_j)
/// splits f_beta into independent components. Components up to
/// `component_enum_limit` are enumerated exhaustively; larger ones use
/// coordinate ascent from the marginal-threshold start, the empty start and
/// `restarts` random starts. Among maximizers the lexicographically smallest d
/// is returned.
OptimizeResult optimize_decisions(const IndicatorMatrix& ind, const GroupStructure& groups, double beta,
                                  const OptimizerOptions& options = {});

/// sum d_i (1 - v_i) / max(1, sum d_i).
double posterior_fdr(std::span<const std::uint8_t> d, const Vector& v);
/// sum (1 - d_i) v_i / max(1, sum (1 - d_i)).
double posterior_fnr(std::span<const std::uint8_t> d, const Vector& v);

enum class CalibrationStatus {
    within_tolerance,   // |FDR - target| <= tol
    below_target,       // best admissible decision undershoots; no evaluated beta hit the band
    no_admissible,      // no nonempty decision with FDR <= target + tol
};

std::string to_string(CalibrationStatus status);

struct CalibrationPoint {
    double beta = 0.0;
    double fdr = 0.0;
    double fnr = 0.0;
    int rejections = 0;
};

struct CalibrationResult {
    double beta = 0.0;
    std::vector<std::uint8_t> d;
    double fdr = 0.0;
    double fnr = 0.0;
    CalibrationStatus status = CalibrationStatus::no_admissible;
    bool exact = true;
    std::vector<CalibrationPoint> evaluated;
};

struct CalibrationOptions {
    double target_fdr = 0.10;
    double tolerance = 0.005;
    int bisection_steps = 40;
    /// Extra betas placed just below distinct marginal probabilities v_i.
    int max_marginal_candidates = 200;
    OptimizerOptions optimizer;
};

/// Searches beta in (0, 1) by bisection, at the marginal probabilities and
/// inside every interval where the exactly solved components keep one optimum.
/// Records every (beta, FDR) pair and returns the admissible decision
/// (FDR <= target + tol) with the most rejections; ties prefer FDR closer to
/// the target, then larger beta.
CalibrationResult calibrate_beta(const IndicatorMatrix& ind, const GroupStructure& groups,
                                 const CalibrationOptions& options = {});

struct BayesFactorResult {
    Vector value;
    std::vector<bool> prior_degenerate;      // prior probability was clipped
    std::vector<bool> posterior_clipped;
    double posterior_clip = 0.0;             // 1 / (2 T_post)
    double prior_clip = 0.0;                 // 1 / (2 T_prior)
};

/// B_i = [p_i / (1 - p_i)] / [q_i / (1 - q_i)] with p_i, q_i the posterior and
/// prior Monte Carlo probabilities of |psi_i| > 1, each clipped to
/// [1/(2T), 1 - 1/(2T)] for its own draw count T.
BayesFactorResult bayes_factors(const IndicatorMatrix& posterior, const IndicatorMatrix& prior);

/// Table-style rendering: ">100" above 100, else three significant digits.
std::string format_bayes_factor(double b);

struct MirnaDecision {
    std::string mirna;
    bool decision = false;
    std::string direction;  // "Up", "Down" or "-"
    double psi_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double bayes_factor = 0.0;
    std::vector<std::string> group_members;
};

struct DecisionReport {
    std::vector<MirnaDecision> rows;
    double beta = 0.0;
    double posterior_fdr = 0.0;
    double posterior_fnr = 0.0;
    int n_discoveries = 0;
    std::string status;
    bool exact = true;
    double bf_clip_posterior = 0.0;
    double bf_clip_prior = 0.0;
};

/// Posterior mean and central 95% interval per miRNA; "Up" iff a discovery has
/// negative posterior mean (lower delta-delta-Ct), "Down" iff positive.
DecisionReport build_decision_report(std::span<const std::string> mirna_names, const Matrix& psi_draws,
                                     const CalibrationResult& calibration, const GroupStructure& groups,
                                     const BayesFactorResult& bf);

void write_decision_csv(const std::filesystem::path& path, const DecisionReport& report);
void write_decision_summary_json(const std::filesystem::path& path, const DecisionReport& report);

}  // namespace nmde
