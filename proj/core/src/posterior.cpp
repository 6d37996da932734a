#include "nmde/posterior.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "nmde/errors.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "priors_posterior";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_multivariate_gamma(int p, double a) {
    double s = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= p; ++j) s += std::lgamma(a + 0.5 * (1 - j));
    return s;
}

// log|I_n + G / delta2| via Cholesky; G = (Z - M)(Z - M)'.
std::optional<double> log_det_identity_plus(const Matrix& g, double delta2) {
    Matrix a = g / delta2;
    a.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) s += std::log(llt.matrixLLT()(i, i));
    return 2.0 * s;
}

double likelihood_from_gram(const Matrix& g, int m, int n, double delta2, double dof) {
    auto ld = log_det_identity_plus(g, delta2);
    if (!ld) return kNegInf;
    return -0.5 * static_cast<double>(m) * n * std::log(delta2) - 0.5 * (dof + n) * (*ld);
}

double log_hyperprior(const ModelState& s, const HyperPriorSpec& priors) {
    double lp = priors.log_prior_delta2(s.delta2);
    for (int l = 0; l < s.k(); ++l) lp += priors.log_prior_strand(l, s.hyper(l));
    return lp;
}

}  // namespace

ModelState ModelState::from_log(Vector psi, Vector log_varrho2, Vector log_nu, Vector log_rho, double log_delta2) {
    if (log_varrho2.size() != log_nu.size() || log_nu.size() != log_rho.size()) {
        throw ValidationError(kModule, "hyperparameter vectors differ in length");
    }
    ModelState s;
    s.psi = std::move(psi);
    s.log_varrho2 = std::move(log_varrho2);
    s.log_nu = std::move(log_nu);
    s.log_rho = std::move(log_rho);
    s.log_delta2 = log_delta2;
    s.varrho2 = s.log_varrho2.array().exp();
    s.nu = s.log_nu.array().exp();
    s.rho = s.log_rho.array().exp();
    s.delta2 = std::exp(log_delta2);
    return s;
}

ModelState ModelState::from_positive(Vector psi, std::span<const StrandHyperParams> hypers, double delta2) {
    const auto k = static_cast<Eigen::Index>(hypers.size());
    Vector lv(k), ln(k), lr(k);
    for (Eigen::Index l = 0; l < k; ++l) {
        const auto& h = hypers[static_cast<std::size_t>(l)];
        if (!h.valid()) throw ValidationError(kModule, "hyperparameters must be positive and finite");
        lv(l) = std::log(h.varrho2);
        ln(l) = std::log(h.nu);
        lr(l) = std::log(h.rho);
    }
    if (!(delta2 > 0.0) || !std::isfinite(delta2)) throw ValidationError(kModule, "delta^2 must be positive");
    return from_log(std::move(psi), std::move(lv), std::move(ln), std::move(lr), std::log(delta2));
}

StrandHyperParams ModelState::hyper(int strand) const {
    return {varrho2(strand), nu(strand), rho(strand)};
}

std::vector<StrandHyperParams> ModelState::hypers() const {
    std::vector<StrandHyperParams> out;
    out.reserve(static_cast<std::size_t>(k()));
    for (int l = 0; l < k(); ++l) out.push_back(hyper(l));
    return out;
}

Vector ModelState::pack() const {
    const int mm = m();
    const int kk = k();
    Vector x(packed_size(mm, kk));
    x.head(mm) = psi;
    for (int l = 0; l < kk; ++l) {
        x(hyper_offset(mm, l)) = log_varrho2(l);
        x(hyper_offset(mm, l) + 1) = log_nu(l);
        x(hyper_offset(mm, l) + 2) = log_rho(l);
    }
    x(delta2_index(mm, kk)) = log_delta2;
    return x;
}

ModelState ModelState::unpack(const Vector& x, int m, int k) {
    if (x.size() != packed_size(m, k)) throw ValidationError(kModule, "packed state has the wrong length");
    Vector lv(k), ln(k), lr(k);
    for (int l = 0; l < k; ++l) {
        lv(l) = x(hyper_offset(m, l));
        ln(l) = x(hyper_offset(m, l) + 1);
        lr(l) = x(hyper_offset(m, l) + 2);
    }
    return from_log(x.head(m), std::move(lv), std::move(ln), std::move(lr), x(delta2_index(m, k)));
}

double ModelState::log_jacobian() const {
    return log_varrho2.sum() + log_nu.sum() + log_rho.sum() + log_delta2;
}

double log_marginal_likelihood(const Matrix& z, const Vector& psi, double delta2, double dof) {
    if (psi.size() != z.cols()) throw ValidationError(kModule, "psi length does not match the number of miRNAs");
    Matrix resid = z.rowwise() - psi.transpose();
    Matrix g = resid * resid.transpose();
    return likelihood_from_gram(g, static_cast<int>(z.cols()), static_cast<int>(z.rows()), delta2, dof);
}

double log_marginal_likelihood_constant(int m, int n, double dof) {
    return log_multivariate_gamma(m, 0.5 * (dof + n)) - log_multivariate_gamma(m, 0.5 * dof) -
           0.5 * static_cast<double>(m) * n * std::log(std::numbers::pi);
}

std::optional<double> log_psi_prior(const GenomeModel& genome, std::span<const StrandHyperParams> hypers,
                                    const Vector& psi, const JitterPolicy& jitter) {
    auto f = genome.factor(hypers, jitter);
    if (!f) return std::nullopt;
    return -0.5 * genome.quad_form(*f, psi) - 0.5 * f->log_det -
           0.5 * static_cast<double>(psi.size()) * std::log(2.0 * std::numbers::pi);
}

double log_posterior(const ModelState& state, const PosteriorModel& model) {
    if (state.m() != model.m() || state.k() != model.k()) throw ValidationError(kModule, "state does not match model");
    if (!state.psi.allFinite()) throw NumericalError(kModule, "psi is not finite");
    const auto hypers = state.hypers();
    auto prior = log_psi_prior(model.genome, hypers, state.psi, model.jitter);
    if (!prior) throw NumericalError(kModule, "prior covariance of psi is not positive definite");
    double lp = *prior + log_hyperprior(state, model.priors);
    if (model.likelihood_enabled) lp += log_marginal_likelihood(model.z, state.psi, state.delta2, model.priors.dof);
    if (std::isnan(lp)) throw NumericalError(kModule, "log posterior is NaN");
    return lp;
}

PosteriorEvaluator::PosteriorEvaluator(const PosteriorModel& model)
    : model_(&model), blocks_(model.genome.blocks().size()) {
    zzt_ = model.z * model.z.transpose();
}

const CholeskyFactor* PosteriorEvaluator::block_factor(std::size_t b, const Vector& x) {
    const int m = model_->m();
    const auto& strands = model_->genome.block_strands(static_cast<int>(b));
    Vector key(3 * static_cast<Eigen::Index>(strands.size()));
    for (std::size_t j = 0; j < strands.size(); ++j) {
        key.segment(3 * static_cast<Eigen::Index>(j), 3) = x.segment(ModelState::hyper_offset(m, strands[j]), 3);
    }
    auto& cache = blocks_[b];
    for (auto& slot : cache.slots) {
        if (slot.filled && slot.key == key) return slot.factor ? &*slot.factor : nullptr;
    }
    auto& slot = cache.slots[static_cast<std::size_t>(cache.next)];
    cache.next = 1 - cache.next;
    slot.key = std::move(key);
    slot.filled = true;
    slot.factor = model_->genome.factor_block(static_cast<int>(b), hypers_, model_->jitter);
    return slot.factor ? &*slot.factor : nullptr;
}

double PosteriorEvaluator::operator()(const Vector& x) {
    if (!x.allFinite()) return kNegInf;
    const int m = model_->m();
    const int k = model_->k();
    hypers_.resize(static_cast<std::size_t>(k));
    double lp = 0.0;
    for (int l = 0; l < k; ++l) {
        const auto o = ModelState::hyper_offset(m, l);
        StrandHyperParams h{std::exp(x(o)), std::exp(x(o + 1)), std::exp(x(o + 2))};
        if (!h.valid()) return kNegInf;
        hypers_[static_cast<std::size_t>(l)] = h;
        lp += model_->priors.log_prior_strand(l, h) + x(o) + x(o + 1) + x(o + 2);
    }
    if (!std::isfinite(lp)) return kNegInf;

    const Vector psi = x.head(m);
    const auto& members = model_->genome.blocks();
    for (std::size_t b = 0; b < members.size(); ++b) {
        const auto* f = block_factor(b, x);
        if (!f) return kNegInf;
        Vector local(static_cast<Eigen::Index>(members[b].size()));
        for (std::size_t j = 0; j < members[b].size(); ++j) local(static_cast<Eigen::Index>(j)) = psi(members[b][j]);
        lp += -0.5 * f->quad_form(local) - 0.5 * f->log_det();
    }
    lp -= 0.5 * m * std::log(2.0 * std::numbers::pi);

    const double log_delta2 = x(ModelState::delta2_index(m, k));
    const double delta2 = std::exp(log_delta2);
    lp += model_->priors.log_prior_delta2(delta2) + log_delta2;

    if (model_->likelihood_enabled) {
        // (Z - 1 psi')(Z - 1 psi')' = ZZ' - u 1' - 1 u' + |psi|^2 11', u = Z psi
        const Vector u = model_->z * psi;
        Matrix g = zzt_;
        g.colwise() -= u;
        g.rowwise() -= u.transpose();
        g.array() += psi.squaredNorm();
        lp += likelihood_from_gram(g, m, model_->n(), delta2, model_->priors.dof);
    }
    return std::isnan(lp) ? kNegInf : lp;
}

}  // namespace nmde
