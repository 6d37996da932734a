#include "nmde/genome_model.hpp"

#include <algorithm>
#include <cmath>

#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "genome_model";

Matrix raw_gram(std::span<const double> coords, const StrandHyperParams& h) {
    const auto r = static_cast<Eigen::Index>(coords.size());
    Matrix g(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        g(i, i) = h.varrho2;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double c = matern_cov(std::abs(coords[static_cast<std::size_t>(i)] - coords[static_cast<std::size_t>(j)]), h);
            g(i, j) = c;
            g(j, i) = c;
        }
    }
    return g;
}

// Certified Gram matrix with jitter folded into the diagonal.
std::optional<Matrix> certified_gram(std::span<const double> coords, const StrandHyperParams& h,
                                     const JitterPolicy& policy, double& jitter) {
    Matrix g = raw_gram(coords, h);
    auto f = cholesky_with_jitter(g, h.varrho2, policy);
    if (!f) return std::nullopt;
    jitter = f->jitter;
    if (jitter > 0.0) g.diagonal().array() += jitter;
    return g;
}

constexpr int kReductionChunks = 16;

}  // namespace

Matrix strand_cov(std::span<const double> coords, const StrandHyperParams& h, const JitterPolicy& policy,
                  double* jitter_used) {
    if (coords.empty()) throw ValidationError(kModule, "strand_cov needs at least one coordinate");
    if (!h.valid()) throw ValidationError(kModule, "invalid strand hyperparameters");
    double jitter = 0.0;
    auto g = certified_gram(coords, h, policy, jitter);
    if (!g) throw NumericalError(kModule, "strand covariance is not positive definite within the jitter budget");
    if (jitter_used) *jitter_used = jitter;
    return *std::move(g);
}

PriorCovariance prior_cov_psi(const GenomeAnnotation& annotation, const DesignMatrix& design,
                              std::span<const StrandHyperParams> hypers, const JitterPolicy& policy) {
    if (static_cast<int>(hypers.size()) != annotation.k()) {
        throw ValidationError(kModule, "need one hyperparameter set per strand");
    }
    if (design.l() != annotation.locus_count()) throw ValidationError(kModule, "design matrix does not match annotation");

    PriorCovariance out;
    out.psi_cov = Matrix::Zero(design.m(), design.m());
    for (int s = 0; s < annotation.k(); ++s) {
        const auto& strand = annotation.strands[static_cast<std::size_t>(s)];
        std::vector<double> coords;
        for (const auto& locus : strand.loci) coords.push_back(locus.coordinate);
        double jitter = 0.0;
        Matrix w = strand_cov(coords, hypers[static_cast<std::size_t>(s)], policy, &jitter);
        out.jitter_used = std::max(out.jitter_used, jitter);

        const int offset = design.strand_offset[static_cast<std::size_t>(s)];
        for (Eigen::Index a = 0; a < w.rows(); ++a) {
            const int ia = design.column_mirna[static_cast<std::size_t>(offset + a)];
            for (Eigen::Index b = 0; b < w.cols(); ++b) {
                const int ib = design.column_mirna[static_cast<std::size_t>(offset + b)];
                out.psi_cov(ia, ib) += w(a, b);
            }
        }
        out.w_blocks.push_back(std::move(w));
    }
    return out;
}

GenomeModel::GenomeModel(GenomeAnnotation annotation, const DesignMatrix& design)
    : annotation_(std::move(annotation)), m_(design.m()) {
    if (design.l() != annotation_.locus_count()) {
        throw ValidationError(kModule, "design matrix does not match annotation");
    }
    DisjointSets sets(m_);
    for (int s = 0; s < annotation_.k(); ++s) {
        const auto& strand = annotation_.strands[static_cast<std::size_t>(s)];
        const int offset = design.strand_offset[static_cast<std::size_t>(s)];
        std::vector<double> coords;
        std::vector<int> mirnas;
        for (std::size_t a = 0; a < strand.loci.size(); ++a) {
            coords.push_back(strand.loci[a].coordinate);
            mirnas.push_back(design.column_mirna[static_cast<std::size_t>(offset) + a]);
        }
        for (std::size_t a = 1; a < mirnas.size(); ++a) sets.unite(mirnas[0], mirnas[a]);
        coords_.push_back(std::move(coords));
        locus_mirna_.push_back(std::move(mirnas));
    }

    block_members_ = sets.components();
    block_of_.assign(static_cast<std::size_t>(m_), -1);
    local_index_.assign(static_cast<std::size_t>(m_), -1);
    for (std::size_t b = 0; b < block_members_.size(); ++b) {
        for (std::size_t j = 0; j < block_members_[b].size(); ++j) {
            block_of_[static_cast<std::size_t>(block_members_[b][j])] = static_cast<int>(b);
            local_index_[static_cast<std::size_t>(block_members_[b][j])] = static_cast<int>(j);
        }
    }
    block_strands_.assign(block_members_.size(), {});
    for (int s = 0; s < annotation_.k(); ++s) {
        const int b = block_of_[static_cast<std::size_t>(locus_mirna_[static_cast<std::size_t>(s)].front())];
        block_strands_[static_cast<std::size_t>(b)].push_back(s);
    }
}

std::optional<Matrix> GenomeModel::block_cov(int b, std::span<const StrandHyperParams> hypers,
                                             const JitterPolicy& policy, double* jitter_used) const {
    const auto& members = block_members_[static_cast<std::size_t>(b)];
    const auto size = static_cast<Eigen::Index>(members.size());
    Matrix k = Matrix::Zero(size, size);
    double max_jitter = 0.0;
    for (int s : block_strands_[static_cast<std::size_t>(b)]) {
        double jitter = 0.0;
        std::optional<Matrix> w;
        try {
            w = certified_gram(coords_[static_cast<std::size_t>(s)], hypers[static_cast<std::size_t>(s)], policy, jitter);
        } catch (const NumericalError&) {
            return std::nullopt;
        }
        if (!w) return std::nullopt;
        max_jitter = std::max(max_jitter, jitter);
        const auto& mirnas = locus_mirna_[static_cast<std::size_t>(s)];
        for (std::size_t a = 0; a < mirnas.size(); ++a) {
            const int la = local_index_[static_cast<std::size_t>(mirnas[a])];
            for (std::size_t c = 0; c < mirnas.size(); ++c) {
                const int lc = local_index_[static_cast<std::size_t>(mirnas[c])];
                k(la, lc) += (*w)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
            }
        }
    }
    if (jitter_used) *jitter_used = max_jitter;
    return k;
}

std::optional<PsiPriorFactor> GenomeModel::factor(std::span<const StrandHyperParams> hypers,
                                                  const JitterPolicy& policy) const {
    if (static_cast<int>(hypers.size()) != k()) throw ValidationError(kModule, "need one hyperparameter set per strand");
    for (const auto& h : hypers) {
        if (!h.valid()) return std::nullopt;
    }
    PsiPriorFactor out;
    out.blocks.reserve(block_members_.size());
    for (int b = 0; b < static_cast<int>(block_members_.size()); ++b) {
        auto f = factor_block(b, hypers, policy);
        if (!f) return std::nullopt;
        out.jitter_used = std::max(out.jitter_used, f->jitter);
        out.log_det += f->log_det();
        out.blocks.push_back(std::move(*f));
    }
    return out;
}

std::optional<CholeskyFactor> GenomeModel::factor_block(int b, std::span<const StrandHyperParams> hypers,
                                                        const JitterPolicy& policy) const {
    double jitter = 0.0;
    auto kb = block_cov(b, hypers, policy, &jitter);
    if (!kb) return std::nullopt;
    auto f = cholesky_with_jitter(*kb, kb->diagonal().maxCoeff(), policy);
    if (f) f->jitter = std::max(f->jitter, jitter);
    return f;
}

double GenomeModel::quad_form(const PsiPriorFactor& f, const Vector& psi) const {
    double q = 0.0;
    for (std::size_t b = 0; b < block_members_.size(); ++b) {
        const auto& members = block_members_[b];
        Vector local(static_cast<Eigen::Index>(members.size()));
        for (std::size_t j = 0; j < members.size(); ++j) local(static_cast<Eigen::Index>(j)) = psi(members[j]);
        q += f.blocks[b].quad_form(local);
    }
    return q;
}

Vector GenomeModel::draw_psi(const PsiPriorFactor& f, Rng& rng) const {
    Vector psi(m_);
    for (std::size_t b = 0; b < block_members_.size(); ++b) {
        const auto& members = block_members_[b];
        Vector xi(static_cast<Eigen::Index>(members.size()));
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi(j) = std_normal(rng);
        Vector local = f.blocks[b].llt.matrixL() * xi;
        for (std::size_t j = 0; j < members.size(); ++j) psi(members[j]) = local(static_cast<Eigen::Index>(j));
    }
    return psi;
}

CorrelationEstimate estimate_prior_correlation(const GenomeModel& model, const HyperSampler& sampler, int n_mc,
                                               std::uint64_t seed, int threads, const JitterPolicy& policy) {
    if (n_mc < 1000) throw ValidationError(kModule, "n_mc must be at least 1000");
    const auto& blocks = model.blocks();

    struct Partial {
        std::vector<Matrix> sums;
        int used = 0;
        int skipped = 0;
    };
    const int chunks = std::min(kReductionChunks, n_mc);
    std::vector<Partial> partials(static_cast<std::size_t>(chunks));

    parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
        Partial& part = partials[c];
        for (const auto& members : blocks) {
            const auto s = static_cast<Eigen::Index>(members.size());
            part.sums.push_back(Matrix::Zero(s, s));
        }
        const int begin = static_cast<int>(static_cast<long>(n_mc) * static_cast<long>(c) / chunks);
        const int end = static_cast<int>(static_cast<long>(n_mc) * static_cast<long>(c + 1) / chunks);
        for (int t = begin; t < end; ++t) {
            Rng rng = make_stream(seed, static_cast<std::uint64_t>(t));
            const auto hypers = sampler(rng);
            std::vector<Matrix> corr;
            bool ok = true;
            for (int b = 0; b < static_cast<int>(blocks.size()) && ok; ++b) {
                auto kb = model.block_cov(b, hypers, policy);
                if (!kb) {
                    ok = false;
                    break;
                }
                Vector inv_sd = kb->diagonal().array().rsqrt();
                if (!inv_sd.allFinite()) {
                    ok = false;
                    break;
                }
                corr.push_back(inv_sd.asDiagonal() * (*kb) * inv_sd.asDiagonal());
            }
            if (!ok) {
                ++part.skipped;
                continue;
            }
            for (std::size_t b = 0; b < blocks.size(); ++b) part.sums[b] += corr[b];
            ++part.used;
        }
    });

    CorrelationEstimate out;
    std::vector<Matrix> total;
    for (const auto& members : blocks) {
        const auto s = static_cast<Eigen::Index>(members.size());
        total.push_back(Matrix::Zero(s, s));
    }
    for (const auto& part : partials) {
        out.draws_used += part.used;
        out.draws_skipped += part.skipped;
        for (std::size_t b = 0; b < blocks.size(); ++b) total[b] += part.sums[b];
    }
    if (out.draws_skipped * 100 > n_mc || out.draws_used == 0) {
        throw NumericalError(kModule, std::to_string(out.draws_skipped) + " of " + std::to_string(n_mc) +
                                          " prior correlation draws failed positive definiteness (limit 1%)");
    }

    out.r = Matrix::Zero(model.m(), model.m());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& members = blocks[b];
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = 0; j < members.size(); ++j) {
                double v = total[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / out.draws_used;
                out.r(members[i], members[j]) = std::clamp(v, -1.0, 1.0);
            }
        }
    }
    out.r.diagonal().setOnes();
    return out;
}

CorrelationEstimate estimate_prior_correlation(const GenomeModel& model, const HyperPriorSpec& priors, int n_mc,
                                               std::uint64_t seed, int threads, const JitterPolicy& policy) {
    HyperSampler sampler = [&priors](Rng& rng) { return priors.draw_hypers(rng); };
    return estimate_prior_correlation(model, sampler, n_mc, seed, threads, policy);
}

Matrix draw_prior_psi(const GenomeModel& model, const HyperPriorSpec& priors, int n, std::uint64_t seed,
                      int threads, const JitterPolicy& policy) {
    Matrix out(n, model.m());
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t t) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(t));
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const auto hypers = priors.draw_hypers(rng);
            auto f = model.factor(hypers, policy);
            if (!f) continue;
            out.row(static_cast<Eigen::Index>(t)) = model.draw_psi(*f, rng).transpose();
            return;
        }
        throw NumericalError(kModule, "could not draw a positive definite prior covariance");
    });
    return out;
}

}  // namespace nmde
