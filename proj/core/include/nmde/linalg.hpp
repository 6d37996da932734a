#pragma once

#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace nmde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Diagonal jitter added when a covariance fails Cholesky: start at
/// `initial_rel * scale`, double until it exceeds `max_rel * scale`.
struct JitterPolicy {
    double initial_rel = 1e-10;
    double max_rel = 1e-6;
};

struct CholeskyFactor {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;

    [[nodiscard]] double log_det() const;
    /// x' A^{-1} x via one triangular solve.
    [[nodiscard]] double quad_form(const Vector& x) const;
};

/// Factorizes `a` (symmetric), escalating diagonal jitter per `policy` relative
/// to `scale`. Returns nullopt when no jitter within budget certifies PD.
std::optional<CholeskyFactor> cholesky_with_jitter(const Matrix& a, double scale,
                                                   const JitterPolicy& policy = {});

/// Minimal union-find over [0, n).
class DisjointSets {
public:
    explicit DisjointSets(int n);
    int find(int x);
    void unite(int a, int b);

    /// Components as sorted index lists, ordered by their smallest member.
    std::vector<std::vector<int>> components();

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
};

}  // namespace nmde
