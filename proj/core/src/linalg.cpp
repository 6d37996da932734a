#include "nmde/linalg.hpp"

#include <cmath>
#include <algorithm>
#include <map>
#include <numeric>

namespace nmde {

double CholeskyFactor::log_det() const {
    const auto& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

double CholeskyFactor::quad_form(const Vector& x) const {
    Vector y = llt.matrixL().solve(x);
    return y.squaredNorm();
}

namespace {

bool factor_ok(const Eigen::LLT<Matrix>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double d = l(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
    }
    return true;
}

}  // namespace

std::optional<CholeskyFactor> cholesky_with_jitter(const Matrix& a, double scale,
                                                   const JitterPolicy& policy) {
    if (!a.allFinite()) return std::nullopt;
    CholeskyFactor f;
    f.llt.compute(a);
    if (factor_ok(f.llt)) return f;

    const double limit = policy.max_rel * scale;
    for (double jitter = policy.initial_rel * scale; jitter <= limit * (1.0 + 1e-12); jitter *= 2.0) {
        Matrix b = a;
        b.diagonal().array() += jitter;
        f.llt.compute(b);
        if (factor_ok(f.llt)) {
            f.jitter = jitter;
            return f;
        }
    }
    return std::nullopt;
}

DisjointSets::DisjointSets(int n) : parent_(static_cast<std::size_t>(n)), rank_(static_cast<std::size_t>(n), 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
}

int DisjointSets::find(int x) {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

void DisjointSets::unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
}

std::vector<std::vector<int>> DisjointSets::components() {
    std::map<int, std::vector<int>> by_root;
    for (int i = 0; i < static_cast<int>(parent_.size()); ++i) by_root[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    out.reserve(by_root.size());
    for (auto& [root, members] : by_root) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
    return out;
}

}  // namespace nmde
