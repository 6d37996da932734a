#include "nmde/predictive.hpp"

#include <cmath>
#include <fstream>

#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"
#include "nmde/stats.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "predictive_validation";

}  // namespace

Matrix sample_inverse_wishart(double dof, const Matrix& scale, Rng& rng) {
    const auto m = scale.rows();
    if (scale.cols() != m || m < 1) throw ValidationError(kModule, "scale matrix must be square");
    if (!(dof > static_cast<double>(m) - 1.0)) throw ValidationError(kModule, "inverse-Wishart dof must exceed m - 1");
    Eigen::LLT<Matrix> llt(scale);
    if (llt.info() != Eigen::Success) throw NumericalError(kModule, "inverse-Wishart scale is not positive definite");

    // Bartlett factor A of X ~ Wishart(dof, I); Sigma = (U A^{-T})(U A^{-T})'
    Matrix a = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        a(i, i) = std::sqrt(2.0 * gamma_draw(rng, 0.5 * (dof - static_cast<double>(i))));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = std_normal(rng);
    }
    const Matrix u = llt.matrixL();
    Matrix a_inv_t = a.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m));
    const Matrix b = u * a_inv_t;
    return b * b.transpose();
}

Matrix predictive_draws(const Matrix& z_train, const Matrix& psi_draws, const Vector& delta2_draws, double dof,
                        Rng& rng) {
    const auto m = z_train.cols();
    const auto n = z_train.rows();
    if (psi_draws.cols() != m || psi_draws.rows() != delta2_draws.size()) {
        throw ValidationError(kModule, "posterior draws do not match the training data");
    }
    Matrix out(psi_draws.rows(), m);
    for (Eigen::Index t = 0; t < psi_draws.rows(); ++t) {
        const Vector psi = psi_draws.row(t).transpose();
        const Matrix centred = z_train.rowwise() - psi.transpose();
        Matrix scale = centred.transpose() * centred;
        scale.diagonal().array() += delta2_draws(t);
        const Matrix sigma = sample_inverse_wishart(dof + static_cast<double>(n), scale, rng);
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) throw NumericalError(kModule, "sampled covariance is not positive definite");
        Vector xi(m);
        for (auto& v : xi) v = std_normal(rng);
        out.row(t) = (psi + llt.matrixL() * xi).transpose();
    }
    return out;
}

PredictiveSummary summarize_predictive(const Matrix& draws, const Vector& observed, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError(kModule, "interval level must lie in (0, 1)");
    if (draws.cols() != observed.size() || draws.rows() < 1) {
        throw ValidationError(kModule, "predictive draws do not match the observation");
    }
    const auto m = draws.cols();
    PredictiveSummary s;
    s.low.resize(m);
    s.high.resize(m);
    s.observed = observed;
    int hits = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<double> col(draws.col(i).data(), draws.col(i).data() + draws.rows());
        s.low(i) = empirical_quantile(col, 0.5 - 0.5 * level);
        s.high(i) = empirical_quantile(col, 0.5 + 0.5 * level);
        const bool in = observed(i) >= s.low(i) && observed(i) <= s.high(i);
        s.covered.push_back(in);
        hits += in;
    }
    s.coverage = static_cast<double>(hits) / static_cast<double>(m);
    return s;
}

namespace {

PredictiveSummary run_fold(const ExpressionDataset& data, int j, const FoldConfig& config, Rng& rng) {
    const int n = data.n();
    if (n < 3) throw ValidationError(kModule, "leave-one-out needs at least three patients");
    if (j < 0 || j >= n) throw ValidationError(kModule, "fold index out of range");

    Matrix train(n - 1, data.m());
    for (int r = 0, o = 0; r < n; ++r) {
        if (r != j) train.row(o++) = data.z.row(r);
    }
    const auto design = build_design_matrix(config.annotation, data.mirna_names);
    PosteriorModel model{train, GenomeModel(config.annotation, design),
                         make_hyperprior_spec(config.annotation, train, config.priors), config.jitter, true};
    auto samples = run_posterior_chain(model, config.sampler, config.mode, std::nullopt, static_cast<std::uint64_t>(j));
    const Matrix psi = samples.psi_draws();
    if (!psi.allFinite()) throw NumericalError(kModule, "refit produced non-finite draws");
    const Matrix pred = predictive_draws(train, psi, samples.delta2_draws(), model.priors.dof, rng);
    auto s = summarize_predictive(pred, data.z.row(j).transpose(), config.level);
    s.acceptance_rate = samples.acceptance_rate();
    return s;
}

}  // namespace

PredictiveSummary loo_predictive(const ExpressionDataset& data, int j, const FoldConfig& config) {
    Rng rng = make_stream(config.sampler.seed, static_cast<std::uint64_t>(data.n() + j));
    PredictiveSummary s;
    try {
        s = run_fold(data, j, config, rng);
    } catch (const NumericalError& e) {
        s.ok = false;
        s.error = e.what();
    }
    s.held_out_patient = j >= 0 && j < data.n() ? data.patient_ids[static_cast<std::size_t>(j)] : std::string();
    s.mirna_names = data.mirna_names;
    return s;
}

std::vector<PredictiveSummary> loo_all(const ExpressionDataset& data, const FoldConfig& config, int threads,
                                       std::optional<std::vector<int>> folds) {
    std::vector<int> idx;
    if (folds) {
        idx = std::move(*folds);
    } else {
        for (int j = 0; j < data.n(); ++j) idx.push_back(j);
    }
    std::vector<PredictiveSummary> out(idx.size());
    parallel_for(idx.size(), threads, [&](std::size_t f) { out[f] = loo_predictive(data, idx[f], config); });
    return out;
}

double overall_coverage(const std::vector<PredictiveSummary>& folds) {
    long hits = 0, cells = 0;
    for (const auto& f : folds) {
        if (!f.ok) continue;
        for (bool c : f.covered) hits += c;
        cells += static_cast<long>(f.covered.size());
    }
    return cells > 0 ? static_cast<double>(hits) / static_cast<double>(cells) : 0.0;
}

void write_fold_csv(const std::filesystem::path& path, const PredictiveSummary& fold) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "mirna,pred_low,pred_high,observed,covered\n";
    if (!fold.ok) return;
    for (std::size_t i = 0; i < fold.mirna_names.size(); ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        out << fold.mirna_names[i] << ',' << csv::format_number(fold.low(e)) << ',' << csv::format_number(fold.high(e))
            << ',' << csv::format_number(fold.observed(e)) << ',' << (fold.covered[i] ? 1 : 0) << '\n';
    }
}

}  // namespace nmde
