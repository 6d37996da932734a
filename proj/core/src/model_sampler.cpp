#include "nmde/model_sampler.hpp"

#include <cmath>

#include <boost/math/special_functions/trigamma.hpp>

#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"

namespace nmde {

double PosteriorSamples::acceptance_rate() const {
    long p = 0, a = 0;
    for (const auto& b : blocks) {
        p += b.proposals;
        a += b.accepted;
    }
    return p > 0 ? static_cast<double>(a) / static_cast<double>(p) : 0.0;
}

ModelState PosteriorSamples::state(long t) const {
    return ModelState::unpack(draws.row(t).transpose(), m, k);
}

int PosteriorSamples::column(const std::string& name) const {
    for (std::size_t i = 0; i < parameter_names.size(); ++i) {
        if (parameter_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::string> parameter_names(std::span<const std::string> mirna_names,
                                         const GenomeAnnotation& annotation) {
    std::vector<std::string> names;
    for (const auto& n : mirna_names) names.push_back("psi[" + n + "]");
    for (const auto& s : annotation.strands) {
        for (const char* prefix : {"log_varrho2", "log_nu", "log_rho"}) names.push_back(std::string(prefix) + "[" + s.id + "]");
    }
    names.emplace_back("log_delta2");
    return names;
}

ModelState default_initial_state(const PosteriorModel& model) {
    Vector psi = model.z.colwise().mean().transpose();
    std::vector<StrandHyperParams> hypers;
    for (int l = 0; l < model.k(); ++l) hypers.push_back(model.priors.mode_strand(l));
    const auto& d = model.priors.delta2;
    const double delta2 = d.shape > 1.0 ? d.mean() : d.mode();
    return ModelState::from_positive(std::move(psi), hypers, delta2);
}

Vector default_relative_scales(const PosteriorModel& model) {
    const int m = model.m();
    const int k = model.k();
    Vector s(ModelState::packed_size(m, k));

    std::vector<StrandHyperParams> modes;
    for (int l = 0; l < k; ++l) modes.push_back(model.priors.mode_strand(l));
    for (int b = 0; b < static_cast<int>(model.genome.blocks().size()); ++b) {
        auto kb = model.genome.block_cov(b, modes, model.jitter);
        const auto& members = model.genome.blocks()[static_cast<std::size_t>(b)];
        for (std::size_t j = 0; j < members.size(); ++j) {
            s(members[j]) = kb ? std::sqrt((*kb)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))) : 1.0;
        }
    }

    // Var(log X) = trigamma(shape) for inverse-gamma X
    double log_varrho2_sd = std::sqrt(boost::math::trigamma(model.priors.varrho.shape));
    if (model.priors.varrho_on == VarrhoPriorOn::varrho) log_varrho2_sd *= 2.0;
    for (int l = 0; l < k; ++l) {
        const int o = ModelState::hyper_offset(m, l);
        s(o) = log_varrho2_sd;
        s(o + 1) = model.priors.nu.scale;
        s(o + 2) = model.priors.rho[static_cast<std::size_t>(l)].scale;
    }
    s(ModelState::delta2_index(m, k)) = std::sqrt(boost::math::trigamma(model.priors.delta2.shape));
    return s;
}

std::vector<Block> sampler_blocks(const GenomeAnnotation& annotation, int m, UpdateMode mode) {
    const int k = annotation.k();
    if (mode == UpdateMode::joint) return {{"joint", 0, ModelState::packed_size(m, k)}};
    std::vector<Block> blocks;
    blocks.push_back({"psi", 0, m});
    for (int l = 0; l < k; ++l) {
        blocks.push_back({"hyper[" + annotation.strands[static_cast<std::size_t>(l)].id + "]", ModelState::hyper_offset(m, l), 3});
    }
    blocks.push_back({"delta2", ModelState::delta2_index(m, k), 1});
    return blocks;
}

PosteriorSamples run_posterior_chain(const PosteriorModel& model, const SamplerConfig& config, UpdateMode mode,
                                     const std::optional<ModelState>& initial, std::uint64_t chain_index) {
    const ModelState init = initial ? *initial : default_initial_state(model);
    if (init.m() != model.m() || init.k() != model.k()) {
        throw ValidationError("tmcmc_sampler", "initial state does not match the model");
    }
    PosteriorEvaluator evaluator(model);
    LogTarget target = [&evaluator](const Vector& x) { return evaluator(x); };

    auto chain = run_chain(target, init.pack(), default_relative_scales(model), sampler_blocks(model.genome.annotation(), model.m(), mode),
                           config, chain_index);

    PosteriorSamples out;
    out.m = model.m();
    out.k = model.k();
    out.draws = std::move(chain.draws);
    out.blocks = std::move(chain.blocks);
    out.warnings = std::move(chain.warnings);
    out.burn_in = config.burn_in;
    out.thin = config.thin;
    return out;
}

std::vector<PosteriorSamples> run_posterior_chains(const PosteriorModel& model, const SamplerConfig& config,
                                                   int chains, int threads, UpdateMode mode) {
    if (chains < 1) throw ValidationError("tmcmc_sampler", "need at least one chain");
    std::vector<PosteriorSamples> out(static_cast<std::size_t>(chains));
    parallel_for(out.size(), threads, [&](std::size_t c) {
        out[c] = run_posterior_chain(model, config, mode, std::nullopt, c);
    });
    return out;
}

PosteriorSamples merge_chains(const std::vector<PosteriorSamples>& chains) {
    if (chains.empty()) throw ValidationError("tmcmc_sampler", "no chains to merge");
    PosteriorSamples out = chains.front();
    long rows = 0;
    for (const auto& c : chains) rows += c.size();
    out.draws.resize(rows, chains.front().draws.cols());
    long r = 0;
    for (std::size_t i = 0; i < chains.size(); ++i) {
        const auto& c = chains[i];
        if (c.size() > 0) out.draws.middleRows(r, c.size()) = c.draws;
        r += c.size();
        if (i == 0) continue;
        for (std::size_t b = 0; b < out.blocks.size() && b < c.blocks.size(); ++b) {
            out.blocks[b].proposals += c.blocks[b].proposals;
            out.blocks[b].accepted += c.blocks[b].accepted;
        }
        out.warnings.insert(out.warnings.end(), c.warnings.begin(), c.warnings.end());
    }
    return out;
}

}  // namespace nmde
