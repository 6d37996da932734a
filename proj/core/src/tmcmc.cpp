#include "nmde/tmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "nmde/data_ingest.hpp"
#include "nmde/errors.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "tmcmc_sampler";

double half_normal(Rng& rng) { return std::abs(std_normal(rng)); }

}  // namespace

void SamplerConfig::validate() const {
    if (n_iterations < 0 || burn_in < 0) throw ValidationError(kModule, "iteration counts must be nonnegative");
    if (burn_in >= n_iterations && !(burn_in == 0 && n_iterations == 0)) {
        throw ValidationError(kModule, "burn_in must be smaller than n_iterations");
    }
    if (thin < 1) throw ValidationError(kModule, "thin must be at least 1");
    if (!(accept_low > 0.0 && accept_low < accept_high && accept_high < 1.0)) {
        throw ValidationError(kModule, "acceptance band must satisfy 0 < low < high < 1");
    }
    if (adaptation_window < 1) throw ValidationError(kModule, "adaptation window must be at least 1");
}

Vector tmcmc_proposal(const Vector& x, const Vector& scales, double epsilon, std::span<const int> signs,
                      Eigen::Index begin, Eigen::Index size) {
    Vector out = x;
    for (Eigen::Index i = 0; i < size; ++i) {
        out(begin + i) += signs[static_cast<std::size_t>(i)] * scales(begin + i) * epsilon;
    }
    return out;
}

double tmcmc_acceptance(double current_log_target, double proposal_log_target) {
    if (!std::isfinite(proposal_log_target)) return 0.0;
    const double diff = proposal_log_target - current_log_target;
    return diff >= 0.0 ? 1.0 : std::exp(diff);
}

StepResult tmcmc_step(Vector& x, double current_log_target, const Vector& scales, const LogTarget& log_target,
                      Rng& rng, Eigen::Index begin, Eigen::Index size) {
    if (size < 0) size = x.size() - begin;
    StepResult r;
    r.epsilon = half_normal(rng);
    std::vector<int> signs(static_cast<std::size_t>(size));
    for (auto& b : signs) b = rademacher(rng);
    Vector proposal = tmcmc_proposal(x, scales, r.epsilon, signs, begin, size);
    const double lp = log_target(proposal);
    const double alpha = tmcmc_acceptance(current_log_target, lp);
    // always consume the uniform so the stream does not depend on alpha
    const double u = uniform01(rng);
    if (u < alpha) {
        x = std::move(proposal);
        r.accepted = true;
        r.log_target = lp;
    } else {
        r.log_target = current_log_target;
    }
    return r;
}

ScaleAdapter::ScaleAdapter(std::size_t blocks, double accept_low, double accept_high, long window)
    : low_(accept_low),
      high_(accept_high),
      window_(window),
      log_factor_(blocks, 0.0),
      window_accepts_(blocks, 0),
      last_rate_(blocks, 0.0) {}

void ScaleAdapter::record(std::size_t block, bool accepted) {
    if (accepted) ++window_accepts_[block];
}

bool ScaleAdapter::end_iteration() {
    if (++filled_ < window_) return false;
    ++windows_done_;
    const double gain = 2.0 / std::sqrt(static_cast<double>(windows_done_));
    const double centre = 0.5 * (low_ + high_);
    for (std::size_t b = 0; b < log_factor_.size(); ++b) {
        const double rate = static_cast<double>(window_accepts_[b]) / static_cast<double>(window_);
        last_rate_[b] = rate;
        log_factor_[b] += gain * (rate - centre);
        window_accepts_[b] = 0;
    }
    filled_ = 0;
    return true;
}

bool ScaleAdapter::in_band(std::size_t block) const {
    return last_rate_[block] >= low_ && last_rate_[block] <= high_;
}

double ChainResult::acceptance_rate() const {
    long p = 0, a = 0;
    for (const auto& b : blocks) {
        p += b.proposals;
        a += b.accepted;
    }
    return p > 0 ? static_cast<double>(a) / static_cast<double>(p) : 0.0;
}

namespace {

void check_blocks(const std::vector<Block>& blocks, Eigen::Index dim) {
    if (blocks.empty()) throw ValidationError(kModule, "at least one block is required");
    for (const auto& b : blocks) {
        if (b.begin < 0 || b.size < 1 || b.begin + b.size > dim) {
            throw ValidationError(kModule, "block '" + b.name + "' is out of range");
        }
    }
}

Vector effective_scales(const Vector& relative, const std::vector<Block>& blocks, const ScaleAdapter& adapter) {
    Vector s = relative;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        s.segment(blocks[b].begin, blocks[b].size) *= adapter.factor(b);
    }
    return s;
}

}  // namespace

ChainResult run_chain(const LogTarget& log_target, Vector x0, const Vector& relative_scales,
                      std::vector<Block> blocks, const SamplerConfig& config, std::uint64_t chain_index) {
    config.validate();
    check_blocks(blocks, x0.size());
    if (relative_scales.size() != x0.size() || !(relative_scales.array() > 0.0).all()) {
        throw ValidationError(kModule, "scales must be positive, one per coordinate");
    }

    Rng rng = make_stream(config.seed, chain_index);
    Vector x = std::move(x0);
    double lp = log_target(x);
    if (!std::isfinite(lp)) throw NumericalError(kModule, "initial state has a non-finite log target");

    ScaleAdapter adapter(blocks.size(), config.accept_low, config.accept_high, config.adaptation_window);
    // start each block near the high-dimensional optimum for a random-walk move
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        adapter.set_log_factor(b, std::log(2.38 / std::sqrt(static_cast<double>(blocks[b].size))));
    }
    Vector scales = effective_scales(relative_scales, blocks, adapter);

    ChainResult out;
    out.burn_in = config.burn_in;
    out.thin = config.thin;
    const long n_draws = config.expected_draws();
    out.draws.resize(n_draws, x.size());
    out.log_targets.reserve(static_cast<std::size_t>(n_draws));
    out.blocks.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) out.blocks[b].name = blocks[b].name;

    long stored = 0;
    for (long it = 0; it < config.n_iterations; ++it) {
        const bool burning = it < config.burn_in;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            auto r = tmcmc_step(x, lp, scales, log_target, rng, blocks[b].begin, blocks[b].size);
            lp = r.log_target;
            if (burning) {
                adapter.record(b, r.accepted);
            } else {
                ++out.blocks[b].proposals;
                if (r.accepted) ++out.blocks[b].accepted;
            }
        }
        if (burning && config.adapt && adapter.end_iteration()) {
            scales = effective_scales(relative_scales, blocks, adapter);
        }
        if (!burning && (it - config.burn_in + 1) % config.thin == 0 && stored < n_draws) {
            out.draws.row(stored++) = x.transpose();
            out.log_targets.push_back(lp);
        }
    }

    for (std::size_t b = 0; b < blocks.size(); ++b) {
        out.blocks[b].final_factor = adapter.factor(b);
        out.blocks[b].last_window_rate = adapter.last_rate(b);
        const auto& st = out.blocks[b];
        const double rate = st.proposals > 0 ? st.acceptance_rate() : adapter.last_rate(b);
        out.blocks[b].in_band = rate >= config.accept_low && rate <= config.accept_high;
        if (config.adapt && config.burn_in >= config.adaptation_window && !out.blocks[b].in_band) {
            out.warnings.push_back("block '" + blocks[b].name + "' has acceptance " + std::to_string(rate) +
                                   " outside the target band");
        }
    }
    out.scales = scales;
    return out;
}

Vector tune_scales(const LogTarget& log_target, Vector x0, const Vector& initial_scales, std::vector<Block> blocks,
                   const SamplerConfig& config, std::vector<std::string>* warnings) {
    SamplerConfig burn = config;
    burn.burn_in = config.burn_in;
    // run_chain requires burn_in < n_iterations; append one frozen iteration
    burn.n_iterations = config.burn_in + 1;
    burn.thin = 1;
    auto result = run_chain(log_target, std::move(x0), initial_scales, std::move(blocks), burn);
    if (warnings) *warnings = result.warnings;
    return result.scales;
}

double effective_sample_size(std::span<const double> chain) {
    const auto n = chain.size();
    if (n < 2) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : chain) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : chain) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (!(c0 > 0.0)) return 1.0;

    auto autocorr = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - mean) * (chain[i + lag] - mean);
        return s / static_cast<double>(n) / c0;
    };

    // Geyer: sum consecutive pairs while positive, enforcing monotone decrease
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = autocorr(2 * k) + autocorr(2 * k + 1);
        if (k > 0 && pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    const double floor = 1.0 / std::log10(static_cast<double>(std::max<std::size_t>(n, 10)));
    tau = std::max(tau, floor);
    return static_cast<double>(n) / tau;
}

std::vector<ParameterDiagnostics> diagnostics(const Matrix& draws, std::span<const std::string> names) {
    std::vector<ParameterDiagnostics> out;
    for (Eigen::Index c = 0; c < draws.cols(); ++c) {
        std::vector<double> col(draws.col(c).data(), draws.col(c).data() + draws.rows());
        ParameterDiagnostics d;
        d.name = static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)] : std::to_string(c);
        if (!col.empty()) {
            d.mean = draws.col(c).mean();
            d.sd = col.size() > 1 ? std::sqrt((draws.col(c).array() - d.mean).square().sum() /
                                              static_cast<double>(col.size() - 1))
                                  : 0.0;
            d.ess = effective_sample_size(col);
        }
        out.push_back(std::move(d));
    }
    return out;
}

void write_trace_csv(const std::filesystem::path& path, const Matrix& draws, std::span<const std::string> names,
                     std::span<const int> columns, long burn_in, long thin) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "iteration,parameter,value\n";
    for (Eigen::Index t = 0; t < draws.rows(); ++t) {
        const long iteration = burn_in + (t + 1) * thin;
        for (int c : columns) {
            out << iteration << ',' << names[static_cast<std::size_t>(c)] << ','
                << csv::format_number(draws(t, c)) << '\n';
        }
    }
}

}  // namespace nmde
