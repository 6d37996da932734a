#include "nmde/nonmarginal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "nmde/data_ingest.hpp"
#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"
#include "nmde/rng.hpp"
#include "nmde/stats.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "nonmarginal_testing";

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

}  // namespace

IndicatorMatrix::IndicatorMatrix(int draws, int m, std::vector<std::uint8_t> bits)
    : draws_(draws), m_(m), bits_(std::move(bits)), counts_(idx(m), 0), marginal_(Vector::Zero(m)) {
    if (draws < 1 || m < 1) throw ValidationError(kModule, "indicator matrix needs at least one draw and one miRNA");
    if (bits_.size() != static_cast<std::size_t>(draws) * idx(m)) {
        throw ValidationError(kModule, "indicator data has the wrong size");
    }
    for (int t = 0; t < draws; ++t) {
        for (int i = 0; i < m; ++i) {
            auto& b = bits_[static_cast<std::size_t>(t) * idx(m) + idx(i)];
            if (b > 1) throw ValidationError(kModule, "indicators must be 0 or 1");
            counts_[idx(i)] += b;
        }
    }
    for (int i = 0; i < m; ++i) marginal_(i) = static_cast<double>(counts_[idx(i)]) / draws;
}

IndicatorMatrix IndicatorMatrix::from_draws(const Matrix& psi_draws, double threshold) {
    const auto t = static_cast<int>(psi_draws.rows());
    const auto m = static_cast<int>(psi_draws.cols());
    if (t < 1 || m < 1) throw ValidationError(kModule, "no posterior draws");
    if (!psi_draws.allFinite()) throw ValidationError(kModule, "posterior draws contain non-finite values");
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(t) * idx(m));
    for (int r = 0; r < t; ++r) {
        for (int i = 0; i < m; ++i) bits[static_cast<std::size_t>(r) * idx(m) + idx(i)] = std::abs(psi_draws(r, i)) > threshold;
    }
    return {t, m, std::move(bits)};
}

GroupStructure GroupStructure::singletons(int m) {
    GroupStructure g;
    g.groups.resize(idx(m));
    for (int i = 0; i < m; ++i) g.groups[idx(i)] = {i};
    return g;
}

GroupStructure form_groups(const Matrix& r, const GroupOptions& options) {
    const auto m = static_cast<int>(r.rows());
    if (r.cols() != m) throw ValidationError(kModule, "correlation matrix must be square");
    if (m < 2) throw ValidationError(kModule, "group formation needs at least two miRNAs");
    if (options.cap < 1) {
        throw ValidationError(kModule, "group cap must be positive");
    }
    if (!(options.percentile >= 0.0 && options.percentile <= 100.0)) {
        throw ValidationError(kModule, "percentile must lie in [0, 100]");
    }
    GroupStructure g = GroupStructure::singletons(m);
    g.cap = options.cap;
    g.cap_includes_self = options.cap_includes_self;

    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(m) * idx(m - 1) / 2);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) upper.push_back(r(i, j));
    }
    g.threshold_r = empirical_quantile(upper, options.percentile / 100.0);

    const int neighbours = options.cap_includes_self ? options.cap - 1 : options.cap;
    for (int i = 0; i < m; ++i) {
        std::vector<int> cand;
        for (int j = 0; j < m; ++j) {
            if (j != i && r(i, j) >= g.threshold_r && r(i, j) > 0.0) cand.push_back(j);
        }
        std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return r(i, a) > r(i, b); });
        if (static_cast<int>(cand.size()) > neighbours) cand.resize(idx(std::max(neighbours, 0)));
        auto& grp = g.groups[idx(i)];
        grp.insert(grp.end(), cand.begin(), cand.end());
        std::sort(grp.begin(), grp.end());
    }
    return g;
}

namespace {

void check_inputs(std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups) {
    if (groups.m() != ind.m()) throw ValidationError(kModule, "group structure and indicators disagree on m");
    if (!d.empty() && static_cast<int>(d.size()) != ind.m()) throw ValidationError(kModule, "decision has wrong length");
}

// Count of draws with r_i = 1 and r_j = d_j on G_i \ {i}.
long joint_count(int i, std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups) {
    long c = 0;
    const auto& g = groups.groups[idx(i)];
    for (int t = 0; t < ind.draws(); ++t) {
        if (!ind(t, i)) continue;
        bool match = true;
        for (int j : g) {
            if (j != i && ind(t, j) != (d[idx(j)] ? 1 : 0)) {
                match = false;
                break;
            }
        }
        if (match) ++c;
    }
    return c;
}

double objective(long s, long k, int draws, double beta) {
    return static_cast<double>(s) / static_cast<double>(draws) - beta * static_cast<double>(k);
}

// Per-miRNA table: counts over neighbour patterns, restricted to draws with r_i = 1.
struct PatternTable {
    std::vector<int> neighbours;   // G_i \ {i}, ascending
    std::vector<long> counts;      // size 2^|neighbours|; bit b <-> neighbours[b]
};

std::vector<PatternTable> build_tables(const IndicatorMatrix& ind, const GroupStructure& groups) {
    const int m = ind.m();
    std::vector<PatternTable> tables(idx(m));
    for (int i = 0; i < m; ++i) {
        auto& tab = tables[idx(i)];
        for (int j : groups.groups[idx(i)]) {
            if (j != i) tab.neighbours.push_back(j);
        }
        if (tab.neighbours.size() > 24) throw ValidationError(kModule, "group too large for pattern tables");
        tab.counts.assign(std::size_t{1} << tab.neighbours.size(), 0);
        for (int t = 0; t < ind.draws(); ++t) {
            if (!ind(t, i)) continue;
            std::size_t p = 0;
            for (std::size_t b = 0; b < tab.neighbours.size(); ++b) {
                if (ind(t, tab.neighbours[b])) p |= std::size_t{1} << b;
            }
            ++tab.counts[p];
        }
    }
    return tables;
}

class ComponentSolver {
public:
    ComponentSolver(std::vector<int> members, const std::vector<PatternTable>& tables, int draws, double beta)
        : members_(std::move(members)), draws_(draws), beta_(beta) {
        const auto c = members_.size();
        std::vector<int> local_of;
        for (std::size_t a = 0; a < c; ++a) {
            const int g = members_[a];
            if (idx(g) >= local_of.size()) local_of.resize(idx(g) + 1, -1);
            local_of[idx(g)] = static_cast<int>(a);
        }
        nb_.resize(c);
        counts_.resize(c);
        rev_.resize(c);
        for (std::size_t a = 0; a < c; ++a) {
            const auto& tab = tables[idx(members_[a])];
            counts_[a] = &tab.counts;
            for (int j : tab.neighbours) {
                const int l = local_of[idx(j)];
                nb_[a].push_back(l);
                rev_[idx(l)].push_back(static_cast<int>(a));
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return members_.size(); }
    [[nodiscard]] const std::vector<int>& members() const { return members_; }

    long term(const std::vector<std::uint8_t>& x, std::size_t a) const {
        if (!x[a]) return 0;
        std::size_t p = 0;
        for (std::size_t b = 0; b < nb_[a].size(); ++b) {
            if (x[idx(nb_[a][b])]) p |= std::size_t{1} << b;
        }
        return (*counts_[a])[p];
    }

    void totals(const std::vector<std::uint8_t>& x, long& s, long& k) const {
        s = 0;
        k = 0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            s += term(x, a);
            k += x[a];
        }
    }

    // Lexicographic order over local positions equals mask order with
    // position 0 as the most significant bit.
    std::vector<std::uint8_t> enumerate() const {
        const auto c = members_.size();
        std::vector<std::uint8_t> x(c, 0), best(c, 0);
        double best_f = 0.0;
        const std::uint64_t total = std::uint64_t{1} << c;
        for (std::uint64_t mask = 1; mask < total; ++mask) {
            for (std::size_t a = 0; a < c; ++a) x[a] = static_cast<std::uint8_t>((mask >> (c - 1 - a)) & 1U);
            long s = 0, k = 0;
            totals(x, s, k);
            const double f = objective(s, k, draws_, beta_);
            if (f > best_f) {
                best_f = f;
                best = x;
            }
        }
        return best;
    }

    // Betas in (0, 1) at which the exhaustive optimum of this component changes:
    // the vertices of the upper envelope of S(d) / T - beta K(d) over all d.
    std::vector<double> breakpoints() const {
        const auto c = members_.size();
        std::vector<long> best_s(c + 1, -1);
        best_s[0] = 0;
        std::vector<std::uint8_t> x(c, 0);
        const std::uint64_t total = std::uint64_t{1} << c;
        for (std::uint64_t mask = 1; mask < total; ++mask) {
            for (std::size_t a = 0; a < c; ++a) x[a] = static_cast<std::uint8_t>((mask >> (c - 1 - a)) & 1U);
            long s = 0, k = 0;
            totals(x, s, k);
            best_s[idx(static_cast<int>(k))] = std::max(best_s[idx(static_cast<int>(k))], s);
        }
        // walk the envelope from beta = 0 upwards; K only decreases
        std::size_t cur = 0;
        for (std::size_t k = 0; k <= c; ++k) {
            if (best_s[k] > best_s[cur]) cur = k;
        }
        std::vector<double> out;
        while (cur > 0) {
            double next_beta = std::numeric_limits<double>::infinity();
            std::size_t next = cur;
            for (std::size_t k = 0; k < cur; ++k) {
                if (best_s[k] < 0) continue;
                const double b = static_cast<double>(best_s[cur] - best_s[k]) /
                                 (static_cast<double>(draws_) * static_cast<double>(cur - k));
                if (b < next_beta || (b == next_beta && k < next)) {
                    next_beta = b;
                    next = k;
                }
            }
            if (next == cur || !(next_beta < 1.0)) break;
            if (next_beta > 0.0) out.push_back(next_beta);
            cur = next;
        }
        return out;
    }

    std::vector<std::uint8_t> ascend(std::vector<std::uint8_t> x) const {
        long s = 0, k = 0;
        totals(x, s, k);
        double f = objective(s, k, draws_, beta_);
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t a = 0; a < x.size(); ++a) {
                long before = term(x, a);
                for (int b : rev_[a]) before += term(x, idx(b));
                x[a] ^= 1U;
                long after = term(x, a);
                for (int b : rev_[a]) after += term(x, idx(b));
                const long s2 = s - before + after;
                const long k2 = k + (x[a] ? 1 : -1);
                const double f2 = objective(s2, k2, draws_, beta_);
                if (f2 > f) {
                    s = s2;
                    k = k2;
                    f = f2;
                    improved = true;
                } else {
                    x[a] ^= 1U;
                }
            }
        }
        return x;
    }

    std::vector<std::uint8_t> heuristic(const Vector& v, int restarts, Rng& rng) const {
        const auto c = members_.size();
        std::vector<std::vector<std::uint8_t>> starts;
        std::vector<std::uint8_t> marginal(c);
        for (std::size_t a = 0; a < c; ++a) marginal[a] = v(members_[a]) > beta_;
        starts.push_back(std::move(marginal));
        starts.emplace_back(c, 0);
        for (int r = 0; r < restarts; ++r) {
            std::vector<std::uint8_t> x(c);
            for (auto& b : x) b = uniform01(rng) < 0.5;
            starts.push_back(std::move(x));
        }
        std::vector<std::uint8_t> best;
        double best_f = -std::numeric_limits<double>::infinity();
        for (auto& s0 : starts) {
            auto x = ascend(std::move(s0));
            long s = 0, k = 0;
            totals(x, s, k);
            const double f = objective(s, k, draws_, beta_);
            if (f > best_f || (f == best_f && x < best)) {
                best_f = f;
                best = std::move(x);
            }
        }
        return best;
    }

private:
    std::vector<int> members_;
    int draws_;
    double beta_;
    std::vector<std::vector<int>> nb_;
    std::vector<std::vector<int>> rev_;
    std::vector<const std::vector<long>*> counts_;
};

}  // namespace

Vector compute_w(std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups) {
    check_inputs(d, ind, groups);
    Vector w(ind.m());
    for (int i = 0; i < ind.m(); ++i) w(i) = static_cast<double>(joint_count(i, d, ind, groups)) / ind.draws();
    return w;
}

double f_beta(std::span<const std::uint8_t> d, const IndicatorMatrix& ind, const GroupStructure& groups, double beta) {
    check_inputs(d, ind, groups);
    long s = 0, k = 0;
    for (int i = 0; i < ind.m(); ++i) {
        if (!d[idx(i)]) continue;
        s += joint_count(i, d, ind, groups);
        ++k;
    }
    return objective(s, k, ind.draws(), beta);
}

bool OptimizeResult::all_exact() const {
    return std::all_of(components.begin(), components.end(), [](const auto& c) { return c.exact; });
}

int OptimizeResult::rejections() const { return static_cast<int>(std::count(d.begin(), d.end(), 1)); }

namespace {

// Beta-independent work shared by every optimization over one posterior.
struct Prepared {
    std::vector<PatternTable> tables;
    std::vector<std::vector<int>> comps;
};

Prepared prepare(const IndicatorMatrix& ind, const GroupStructure& groups, const OptimizerOptions& options) {
    check_inputs({}, ind, groups);
    if (options.component_enum_limit < 1 || options.component_enum_limit > 30) {
        throw ValidationError(kModule, "component enumeration limit must lie in [1, 30]");
    }
    const int m = ind.m();
    DisjointSets ds(m);
    for (int i = 0; i < m; ++i) {
        for (int j : groups.groups[idx(i)]) {
            if (j < 0 || j >= m) throw ValidationError(kModule, "group member out of range");
            ds.unite(i, j);
        }
    }
    return {build_tables(ind, groups), ds.components()};
}

OptimizeResult solve(const Prepared& prep, const IndicatorMatrix& ind, double beta, const OptimizerOptions& options) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError(kModule, "beta must lie in (0, 1)");
    const auto& comps = prep.comps;
    OptimizeResult out;
    out.d.assign(idx(ind.m()), 0);
    out.components.resize(comps.size());
    std::vector<std::vector<std::uint8_t>> local(comps.size());
    std::vector<long> s_part(comps.size(), 0), k_part(comps.size(), 0);
    parallel_for(comps.size(), options.threads, [&](std::size_t c) {
        ComponentSolver solver(comps[c], prep.tables, ind.draws(), beta);
        const bool exact = static_cast<int>(solver.size()) <= options.component_enum_limit;
        if (exact) {
            local[c] = solver.enumerate();
        } else {
            Rng rng = make_stream(options.seed, comps[c].front());
            local[c] = solver.heuristic(ind.marginal(), options.restarts, rng);
        }
        solver.totals(local[c], s_part[c], k_part[c]);
        out.components[c] = {comps[c], exact};
    });
    long s = 0, k = 0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (std::size_t a = 0; a < comps[c].size(); ++a) out.d[idx(comps[c][a])] = local[c][a];
        s += s_part[c];
        k += k_part[c];
    }
    out.objective = objective(s, k, ind.draws(), beta);
    return out;
}

}  // namespace

OptimizeResult optimize_decisions(const IndicatorMatrix& ind, const GroupStructure& groups, double beta,
                                  const OptimizerOptions& options) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError(kModule, "beta must lie in (0, 1)");
    return solve(prepare(ind, groups, options), ind, beta, options);
}

double posterior_fdr(std::span<const std::uint8_t> d, const Vector& v) {
    if (static_cast<Eigen::Index>(d.size()) != v.size()) throw ValidationError(kModule, "decision has wrong length");
    double num = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d[i]) continue;
        num += 1.0 - v(static_cast<Eigen::Index>(i));
        ++k;
    }
    return num / std::max(1, k);
}

double posterior_fnr(std::span<const std::uint8_t> d, const Vector& v) {
    if (static_cast<Eigen::Index>(d.size()) != v.size()) throw ValidationError(kModule, "decision has wrong length");
    double num = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i]) continue;
        num += v(static_cast<Eigen::Index>(i));
        ++k;
    }
    return num / std::max(1, k);
}

std::string to_string(CalibrationStatus status) {
    switch (status) {
        case CalibrationStatus::within_tolerance: return "within_tolerance";
        case CalibrationStatus::below_target: return "below_target";
        case CalibrationStatus::no_admissible: return "no_admissible";
    }
    return "unknown";
}

CalibrationResult calibrate_beta(const IndicatorMatrix& ind, const GroupStructure& groups,
                                 const CalibrationOptions& options) {
    if (!(options.target_fdr > 0.0 && options.target_fdr < 1.0)) {
        throw ValidationError(kModule, "target FDR must lie in (0, 1)");
    }
    if (!(options.tolerance >= 0.0)) throw ValidationError(kModule, "tolerance must be nonnegative");
    const Vector& v = ind.marginal();
    const double limit = options.target_fdr + options.tolerance;

    struct Eval {
        CalibrationPoint point;
        std::vector<std::uint8_t> d;
        bool exact = true;
    };
    const auto prep = prepare(ind, groups, options.optimizer);
    auto evaluate = [&](double beta, int threads) {
        OptimizerOptions opt = options.optimizer;
        opt.threads = threads;
        auto res = solve(prep, ind, beta, opt);
        Eval e;
        e.point = {beta, posterior_fdr(res.d, v), posterior_fnr(res.d, v), res.rejections()};
        e.exact = res.all_exact();
        e.d = std::move(res.d);
        return e;
    };

    std::vector<Eval> evals;
    double lo = 0.0, hi = 1.0;
    for (int s = 0; s < options.bisection_steps; ++s) {
        const double mid = 0.5 * (lo + hi);
        auto e = evaluate(mid, options.optimizer.threads);
        if (e.point.fdr <= limit) {
            hi = mid;
        } else {
            lo = mid;
        }
        evals.push_back(std::move(e));
    }

    std::vector<double> marginal_values;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) > 1e-9 && v(i) < 1.0) marginal_values.push_back(v(i));
    }
    std::sort(marginal_values.begin(), marginal_values.end());
    marginal_values.erase(std::unique(marginal_values.begin(), marginal_values.end()), marginal_values.end());
    std::vector<double> extra;
    const int cap = std::max(options.max_marginal_candidates, 0);
    if (static_cast<int>(marginal_values.size()) <= cap) {
        for (double x : marginal_values) extra.push_back(x - 1e-9);
    } else if (cap > 0) {
        for (int c = 0; c < cap; ++c) {
            const auto p = static_cast<std::size_t>(std::llround(static_cast<double>(c) * static_cast<double>(marginal_values.size() - 1) / std::max(cap - 1, 1)));
            extra.push_back(marginal_values[p] - 1e-9);
        }
    }
    // one beta inside every interval on which all exhaustively solved
    // components keep the same optimum
    std::vector<double> cuts;
    for (const auto& comp : prep.comps) {
        if (static_cast<int>(comp.size()) > options.optimizer.component_enum_limit) continue;
        const auto b = ComponentSolver(comp, prep.tables, ind.draws(), 0.5).breakpoints();
        cuts.insert(cuts.end(), b.begin(), b.end());
    }
    cuts.push_back(0.0);
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) extra.push_back(0.5 * (cuts[c] + cuts[c + 1]));

    std::vector<Eval> extra_evals(extra.size());
    parallel_for(extra.size(), options.optimizer.threads, [&](std::size_t c) { extra_evals[c] = evaluate(extra[c], 1); });
    for (auto& e : extra_evals) evals.push_back(std::move(e));

    CalibrationResult out;
    for (const auto& e : evals) out.evaluated.push_back(e.point);
    std::sort(out.evaluated.begin(), out.evaluated.end(), [](const auto& a, const auto& b) { return a.beta < b.beta; });

    const Eval* best = nullptr;
    for (const auto& e : evals) {
        if (e.point.rejections == 0 || e.point.fdr > limit) continue;
        if (!best) {
            best = &e;
            continue;
        }
        const auto& b = best->point;
        const auto& p = e.point;
        const double db = std::abs(b.fdr - options.target_fdr);
        const double dp = std::abs(p.fdr - options.target_fdr);
        if (p.rejections > b.rejections || (p.rejections == b.rejections && (dp < db || (dp == db && p.beta > b.beta)))) {
            best = &e;
        }
    }

    out.exact = std::all_of(evals.begin(), evals.end(), [](const Eval& e) { return e.exact; });
    if (!best) {
        out.beta = hi;
        out.d.assign(idx(ind.m()), 0);
        out.fdr = 0.0;
        out.fnr = posterior_fnr(out.d, v);
        out.status = CalibrationStatus::no_admissible;
        return out;
    }
    out.beta = best->point.beta;
    out.d = best->d;
    out.fdr = best->point.fdr;
    out.fnr = best->point.fnr;
    out.status = std::abs(out.fdr - options.target_fdr) <= options.tolerance ? CalibrationStatus::within_tolerance
                                                                              : CalibrationStatus::below_target;
    return out;
}

BayesFactorResult bayes_factors(const IndicatorMatrix& posterior, const IndicatorMatrix& prior) {
    if (posterior.m() != prior.m()) throw ValidationError(kModule, "posterior and prior indicators disagree on m");
    BayesFactorResult out;
    const int m = posterior.m();
    out.value.resize(m);
    out.posterior_clip = 0.5 / posterior.draws();
    out.prior_clip = 0.5 / prior.draws();
    out.prior_degenerate.assign(idx(m), false);
    out.posterior_clipped.assign(idx(m), false);
    auto clip = [](double p, double lo, bool& flag) {
        const double c = std::clamp(p, lo, 1.0 - lo);
        flag = c != p;
        return c;
    };
    for (int i = 0; i < m; ++i) {
        bool pf = false, qf = false;
        const double p = clip(posterior.marginal()(i), out.posterior_clip, pf);
        const double q = clip(prior.marginal()(i), out.prior_clip, qf);
        out.posterior_clipped[idx(i)] = pf;
        out.prior_degenerate[idx(i)] = qf;
        out.value(i) = (p / (1.0 - p)) / (q / (1.0 - q));
    }
    return out;
}

std::string format_bayes_factor(double b) {
    if (b > 100.0) return ">100";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", b);
    return buf;
}

DecisionReport build_decision_report(std::span<const std::string> mirna_names, const Matrix& psi_draws,
                                     const CalibrationResult& calibration, const GroupStructure& groups,
                                     const BayesFactorResult& bf) {
    const auto m = static_cast<int>(mirna_names.size());
    if (psi_draws.cols() != m || static_cast<int>(calibration.d.size()) != m || groups.m() != m || bf.value.size() != m) {
        throw ValidationError(kModule, "report inputs disagree on the number of miRNAs");
    }
    if (psi_draws.rows() < 1) throw ValidationError(kModule, "no posterior draws");
    DecisionReport rep;
    rep.beta = calibration.beta;
    rep.posterior_fdr = calibration.fdr;
    rep.posterior_fnr = calibration.fnr;
    rep.status = to_string(calibration.status);
    rep.exact = calibration.exact;
    rep.bf_clip_posterior = bf.posterior_clip;
    rep.bf_clip_prior = bf.prior_clip;
    for (int i = 0; i < m; ++i) {
        MirnaDecision row;
        row.mirna = mirna_names[idx(i)];
        row.decision = calibration.d[idx(i)] != 0;
        std::vector<double> col(psi_draws.rows());
        for (Eigen::Index t = 0; t < psi_draws.rows(); ++t) col[static_cast<std::size_t>(t)] = psi_draws(t, i);
        row.psi_hat = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
        row.ci_low = empirical_quantile(col, 0.025);
        row.ci_high = empirical_quantile(col, 0.975);
        row.direction = !row.decision ? "-" : row.psi_hat < 0.0 ? "Up" : row.psi_hat > 0.0 ? "Down" : "-";
        row.bayes_factor = bf.value(i);
        for (int j : groups.groups[idx(i)]) row.group_members.push_back(mirna_names[idx(j)]);
        rep.n_discoveries += row.decision;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}  // namespace

void write_decision_csv(const std::filesystem::path& path, const DecisionReport& report) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "mirna,decision,direction,psi_hat,ci_low,ci_high,bayes_factor,group_members\n";
    for (const auto& r : report.rows) {
        std::string members;
        for (std::size_t j = 0; j < r.group_members.size(); ++j) members += (j ? ";" : "") + r.group_members[j];
        out << csv_field(r.mirna) << ',' << (r.decision ? 1 : 0) << ',' << r.direction << ','
            << csv::format_number(r.psi_hat) << ',' << csv::format_number(r.ci_low) << ','
            << csv::format_number(r.ci_high) << ',' << format_bayes_factor(r.bayes_factor) << ','
            << csv_field(members) << '\n';
    }
}

void write_decision_summary_json(const std::filesystem::path& path, const DecisionReport& report) {
    nlohmann::ordered_json j;
    j["beta"] = report.beta;
    j["posterior_fdr"] = report.posterior_fdr;
    j["posterior_fnr"] = report.posterior_fnr;
    j["n_discoveries"] = report.n_discoveries;
    j["calibration_status"] = report.status;
    j["exact_optimization"] = report.exact;
    j["bayes_factor_clip"] = {{"posterior", report.bf_clip_posterior}, {"prior", report.bf_clip_prior}};
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace nmde
