#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nmde/data_ingest.hpp"
#include "nmde/errors.hpp"
#include "nmde/genome_model.hpp"
#include "nmde/samples_io.hpp"
#include "nmde/simulate.hpp"

namespace nmde::cli {

namespace {

constexpr const char* kModule = "cli_reporting";
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::ostream& out(const Context& ctx) { return *ctx.out; }

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ValidationError(kModule, "cannot write " + path.string());
    f << j.dump(2) << '\n';
}

std::string file_hash(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError(kModule, "cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

json settings_json(const RunConfig& c) {
    json s = json::object();
    for (const auto& [k, v] : c.values()) s[k] = v;
    return s;
}

json manifest_base(const Context& ctx, const std::string& command) {
    json m;
    m["command"] = command;
    m["version"] = "0.1.0";
    m["seed"] = ctx.config.seed();
    m["config_hash"] = ctx.config.hash();
    m["settings"] = settings_json(ctx.config);
    return m;
}

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    void write(const fs::path& dir, const std::string& command) const {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_json(dir / ("timing_" + command + ".json"), json{{"command", command}, {"wall_seconds", s}});
    }

private:
    std::chrono::steady_clock::time_point start_;
};

fs::path required_path(const RunConfig& c, const std::string& key) {
    const auto& v = c.str(key);
    if (v.empty()) throw ValidationError(kModule, key + " must be set");
    if (!fs::exists(v)) throw ValidationError(kModule, key + ": file not found: " + v);
    return v;
}

fs::path prepare_output(const RunConfig& c) {
    const auto dir = c.output_dir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError(kModule, "cannot create output directory " + dir.string());
    return dir;
}

struct Inputs {
    ExpressionDataset data;
    GenomeAnnotation annotation;
    json files;
};

Inputs load_inputs(const RunConfig& c) {
    Inputs in;
    const auto case_path = required_path(c, "paths.case");
    const auto control_path = required_path(c, "paths.control");
    IngestOptions opt;
    opt.drop_incomplete_patients = c.flag("ingest.drop_incomplete_patients");
    in.data = load_expression(case_path, control_path, opt);
    in.files["case"] = {{"path", case_path.string()}, {"fnv1a64", file_hash(case_path)}};
    in.files["control"] = {{"path", control_path.string()}, {"fnv1a64", file_hash(control_path)}};
    return in;
}

void load_annotation_into(Inputs& in, const RunConfig& c) {
    const auto ann_path = required_path(c, "paths.annotation");
    std::optional<fs::path> lengths;
    if (!c.str("paths.lengths").empty()) lengths = required_path(c, "paths.lengths");
    in.annotation = restrict_annotation(load_annotation(ann_path, lengths), in.data.mirna_names);
    in.files["annotation"] = {{"path", ann_path.string()}, {"fnv1a64", file_hash(ann_path)}};
    if (lengths) in.files["lengths"] = {{"path", lengths->string()}, {"fnv1a64", file_hash(*lengths)}};
}

PosteriorModel build_model(const Inputs& in, const RunConfig& c, const Matrix& z) {
    const auto design = build_design_matrix(in.annotation, in.data.mirna_names);
    return PosteriorModel{z, GenomeModel(in.annotation, design), make_hyperprior_spec(in.annotation, z, c.priors()),
                          c.jitter(), true};
}

std::vector<std::vector<std::string>> read_table(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError(kModule, "cannot open " + path.string() + " (run the producing command first)");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) rows.push_back(csv::split_line(line));
    }
    if (rows.empty()) throw ValidationError(kModule, path.string() + " is empty");
    return rows;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name, const fs::path& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ValidationError(kModule, path.string() + ": missing column '" + name + "'");
}

std::string fixed(double v, int digits = 2) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

std::uint64_t derived_seed(std::uint64_t seed, const std::string& purpose) {
    return splitmix64(seed ^ fnv1a64(purpose));
}

std::string ComparisonRow::method() const {
    if (nmd && lrbh) return "NMD, LRBH";
    return nmd ? "NMD" : "LRBH";
}

std::vector<ComparisonRow> merge_discoveries(const std::vector<std::string>& order, const std::vector<std::string>& nmd,
                                             const std::vector<std::string>& lrbh) {
    const std::set<std::string> a(nmd.begin(), nmd.end()), b(lrbh.begin(), lrbh.end());
    std::vector<ComparisonRow> rows;
    std::set<std::string> seen;
    for (const auto& name : order) {
        if (!seen.insert(name).second) continue;
        ComparisonRow r{name, a.count(name) > 0, b.count(name) > 0};
        if (r.nmd || r.lrbh) rows.push_back(r);
    }
    for (const auto& name : nmd) {
        if (!seen.count(name)) throw ValidationError(kModule, "NMD discovery '" + name + "' is not a known miRNA");
    }
    for (const auto& name : lrbh) {
        if (!seen.count(name)) throw ValidationError(kModule, "LRBH discovery '" + name + "' is not a known miRNA");
    }
    return rows;
}

void cmd_fit(const Context& ctx) {
    const auto& c = ctx.config;
    Timer timer;
    const auto sampler = c.sampler();
    const auto chains = c.integer("sampler.chains");
    if (chains < 1) throw ValidationError(kModule, "sampler.chains must be at least 1");
    auto in = load_inputs(c);
    load_annotation_into(in, c);
    const auto dir = prepare_output(c);
    const auto model = build_model(in, c, in.data.z);

    auto runs = run_posterior_chains(model, sampler, static_cast<int>(chains), ctx.threads, c.update_mode());
    auto names = parameter_names(in.data.mirna_names, in.annotation);
    for (auto& r : runs) r.parameter_names = names;
    auto samples = merge_chains(runs);
    samples.parameter_names = names;

    const auto samples_path = c.samples_path();
    write_samples(samples_path, samples);

    std::vector<int> trace_cols;
    const auto& trace = c.str("sampler.trace");
    if (trace != "none") {
        for (int i = trace == "all" ? 0 : model.m(); i < static_cast<int>(names.size()); ++i) trace_cols.push_back(i);
        for (std::size_t r = 0; r < runs.size(); ++r) {
            const auto path = dir / (r == 0 ? std::string("trace.csv") : "trace_chain" + std::to_string(r) + ".csv");
            write_trace_csv(path, runs[r].draws, names, trace_cols, sampler.burn_in, sampler.thin);
        }
    }

    {
        std::ofstream diag(dir / "diagnostics.csv");
        diag << "parameter,mean,sd,ess\n";
        for (const auto& d : diagnostics(samples.draws, names)) {
            diag << d.name << ',' << csv::format_number(d.mean) << ',' << csv::format_number(d.sd) << ','
                 << csv::format_number(d.ess) << '\n';
        }
    }

    json m = manifest_base(ctx, "fit");
    m["inputs"] = in.files;
    m["data"] = {{"n", in.data.n()}, {"m", in.data.m()}, {"k", in.annotation.k()}};
    json blocks = json::array();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const auto& b : runs[r].blocks) {
            blocks.push_back({{"chain", r},
                              {"block", b.name},
                              {"acceptance_rate", b.acceptance_rate()},
                              {"final_scale_factor", b.final_factor},
                              {"last_burn_in_window_rate", b.last_window_rate},
                              {"in_band", b.in_band}});
        }
    }
    m["sampler"] = {{"chains", chains},
                    {"draws", samples.size()},
                    {"acceptance_rate", samples.acceptance_rate()},
                    {"blocks", blocks},
                    {"warnings", samples.warnings}};
    m["outputs"] = {{"samples", samples_path.string()}, {"samples_fnv1a64", file_hash(samples_path)}};
    write_json(dir / "manifest_fit.json", m);
    timer.write(dir, "fit");

    out(ctx) << "fit: n=" << in.data.n() << " m=" << in.data.m() << " k=" << in.annotation.k() << ", "
             << samples.size() << " draws, acceptance " << fixed(samples.acceptance_rate(), 3) << '\n';
    for (const auto& b : runs.front().blocks) {
        out(ctx) << "  block " << b.name << ": acceptance " << fixed(b.acceptance_rate(), 3)
                 << (b.in_band ? "" : " (outside the target band)") << '\n';
    }
    for (const auto& w : samples.warnings) out(ctx) << "  warning: " << w << '\n';
    out(ctx) << "  samples written to " << samples_path.string() << '\n';
}

void cmd_test(const Context& ctx) {
    const auto& c = ctx.config;
    Timer timer;
    auto in = load_inputs(c);
    load_annotation_into(in, c);
    const auto dir = prepare_output(c);
    const auto samples_path = c.samples_path();
    if (!fs::exists(samples_path)) throw ValidationError(kModule, "samples not found: " + samples_path.string());
    const auto samples = read_samples(samples_path);
    const auto expected = parameter_names(in.data.mirna_names, in.annotation);
    if (samples.parameter_names != expected) {
        throw ValidationError(kModule, "samples do not match the configured dataset and annotation");
    }
    if (samples.size() < 1) throw ValidationError(kModule, "samples file holds no draws");

    const auto model = build_model(in, c, in.data.z);
    const auto corr = estimate_prior_correlation(model.genome, model.priors,
                                                 static_cast<int>(c.integer("testing.correlation_draws")),
                                                 derived_seed(c.seed(), "correlation"), ctx.threads, c.jitter());
    const auto groups = form_groups(corr.r, c.groups());

    const Matrix psi = samples.psi_draws();
    const auto post = IndicatorMatrix::from_draws(psi);
    const auto calibration = calibrate_beta(post, groups, c.calibration(ctx.threads));
    const Matrix prior_psi = draw_prior_psi(model.genome, model.priors, static_cast<int>(c.integer("testing.prior_draws")),
                                            derived_seed(c.seed(), "prior"), ctx.threads, c.jitter());
    const auto bf = bayes_factors(post, IndicatorMatrix::from_draws(prior_psi));
    const auto report = build_decision_report(in.data.mirna_names, psi, calibration, groups, bf);

    write_decision_csv(dir / "decisions.csv", report);
    write_decision_summary_json(dir / "decisions_summary.json", report);
    {
        std::ofstream cal(dir / "calibration.csv");
        cal << "beta,posterior_fdr,posterior_fnr,rejections\n";
        for (const auto& p : calibration.evaluated) {
            cal << csv::format_number(p.beta) << ',' << csv::format_number(p.fdr) << ',' << csv::format_number(p.fnr)
                << ',' << p.rejections << '\n';
        }
    }

    json m = manifest_base(ctx, "test");
    m["inputs"] = in.files;
    m["inputs"]["samples"] = {{"path", samples_path.string()}, {"fnv1a64", file_hash(samples_path)}};
    m["groups"] = {{"threshold_r", groups.threshold_r},
                   {"correlation_draws_used", corr.draws_used},
                   {"correlation_draws_skipped", corr.draws_skipped}};
    m["calibration"] = {{"status", report.status}, {"exact_optimization", report.exact}};
    int degenerate = 0;
    for (bool b : bf.prior_degenerate) degenerate += b;
    m["bayes_factors"] = {{"posterior_clip", bf.posterior_clip},
                          {"prior_clip", bf.prior_clip},
                          {"degenerate_prior_count", degenerate}};
    write_json(dir / "manifest_test.json", m);
    timer.write(dir, "test");

    auto& o = out(ctx);
    o << "NMD: " << report.n_discoveries << " discoveries, beta " << csv::format_number(report.beta)
      << ", posterior FDR " << fixed(report.posterior_fdr, 3) << ", posterior FNR " << fixed(report.posterior_fnr, 3)
      << " (" << report.status << ")\n";
    if (report.n_discoveries > 0) {
        o << std::left << std::setw(20) << "miRNA" << std::right << std::setw(8) << "psi" << std::setw(18)
          << "95% CI" << std::setw(8) << "BF" << "  Direction\n";
        for (const auto& r : report.rows) {
            if (!r.decision) continue;
            o << std::left << std::setw(20) << r.mirna << std::right << std::setw(8) << fixed(r.psi_hat)
              << std::setw(18) << ("(" + fixed(r.ci_low) + ", " + fixed(r.ci_high) + ")") << std::setw(8)
              << format_bayes_factor(r.bayes_factor) << "  " << r.direction << '\n';
        }
    }
}

void cmd_lrbh(const Context& ctx) {
    const auto& c = ctx.config;
    Timer timer;
    const auto in = load_inputs(c);
    const auto dir = prepare_output(c);
    const auto report = run_lrbh(in.data, c.lrbh(ctx.threads));
    write_lrbh_csv(dir / "lrbh.csv", report);
    json m = manifest_base(ctx, "lrbh");
    m["inputs"] = in.files;
    m["n_rejected"] = report.n_rejected();
    write_json(dir / "manifest_lrbh.json", m);
    timer.write(dir, "lrbh");
    out(ctx) << "LRBH (" << c.str("lrbh.method") << "): " << report.n_rejected() << " of " << in.data.m()
             << " rejected at q = " << c.str("lrbh.q") << '\n';
}

void cmd_cv(const Context& ctx) {
    const auto& c = ctx.config;
    Timer timer;
    auto in = load_inputs(c);
    load_annotation_into(in, c);
    const auto dir = prepare_output(c) / "cv";
    fs::create_directories(dir);

    FoldConfig fold;
    fold.annotation = in.annotation;
    fold.priors = c.priors();
    fold.jitter = c.jitter();
    fold.sampler = c.sampler("cv");
    fold.mode = c.update_mode();
    fold.level = c.real("cv.level");

    std::optional<std::vector<int>> folds;
    if (!c.str("cv.folds").empty()) {
        folds.emplace();
        for (const auto& id : csv::split_line(c.str("cv.folds"))) {
            auto it = std::find(in.data.patient_ids.begin(), in.data.patient_ids.end(), id);
            if (it == in.data.patient_ids.end()) throw ValidationError(kModule, "cv.folds: unknown patient '" + id + "'");
            folds->push_back(static_cast<int>(it - in.data.patient_ids.begin()));
        }
    }
    const auto results = loo_all(in.data, fold, ctx.threads, folds);

    json fj = json::array();
    for (const auto& r : results) {
        write_fold_csv(dir / ("fold_" + r.held_out_patient + ".csv"), r);
        json e = {{"patient", r.held_out_patient}, {"ok", r.ok}};
        if (r.ok) {
            e["coverage"] = r.coverage;
            e["acceptance_rate"] = r.acceptance_rate;
        } else {
            e["error"] = r.error;
        }
        fj.push_back(e);
    }
    const double coverage = overall_coverage(results);
    json m = manifest_base(ctx, "cv");
    m["inputs"] = in.files;
    m["level"] = fold.level;
    m["overall_coverage"] = coverage;
    m["folds"] = fj;
    write_json(prepare_output(c) / "manifest_cv.json", m);
    timer.write(prepare_output(c), "cv");

    int failed = 0;
    for (const auto& r : results) failed += !r.ok;
    out(ctx) << "cv: " << results.size() << " folds, overall " << fixed(100.0 * fold.level, 0) << "% coverage "
             << fixed(coverage, 3) << (failed ? ", " + std::to_string(failed) + " failed folds" : std::string()) << '\n';
}

void cmd_report(const Context& ctx) {
    const auto& c = ctx.config;
    const auto dir = c.output_dir();
    const auto dpath = dir / "decisions.csv";
    const auto lpath = dir / "lrbh.csv";
    const auto drows = read_table(dpath);
    const auto lrows = read_table(lpath);

    const auto& dh = drows.front();
    const auto d_name = column_of(dh, "mirna", dpath), d_dec = column_of(dh, "decision", dpath);
    const auto d_psi = column_of(dh, "psi_hat", dpath), d_lo = column_of(dh, "ci_low", dpath);
    const auto d_hi = column_of(dh, "ci_high", dpath), d_bf = column_of(dh, "bayes_factor", dpath);
    const auto d_dir = column_of(dh, "direction", dpath);
    const auto l_name = column_of(lrows.front(), "mirna", lpath), l_rej = column_of(lrows.front(), "rejected", lpath);

    std::vector<std::string> order, nmd, lrbh;
    std::map<std::string, const std::vector<std::string>*> detail;
    for (std::size_t r = 1; r < drows.size(); ++r) {
        const auto& row = drows[r];
        if (row.size() != dh.size()) throw ValidationError(kModule, dpath.string() + ": malformed row");
        order.push_back(row[d_name]);
        detail[row[d_name]] = &row;
        if (row[d_dec] == "1") nmd.push_back(row[d_name]);
    }
    for (std::size_t r = 1; r < lrows.size(); ++r) {
        const auto& row = lrows[r];
        if (row.size() != lrows.front().size()) throw ValidationError(kModule, lpath.string() + ": malformed row");
        if (row[l_rej] == "1") lrbh.push_back(row[l_name]);
    }
    const auto rows = merge_discoveries(order, nmd, lrbh);

    std::ofstream f(dir / "comparison.csv");
    if (!f) throw ValidationError(kModule, "cannot write comparison.csv");
    f << "mirna,method,psi_hat,ci_low,ci_high,bayes_factor,direction\n";
    int common = 0;
    for (const auto& r : rows) {
        const auto& d = *detail.at(r.mirna);
        f << r.mirna << ",\"" << r.method() << "\"," << d[d_psi] << ',' << d[d_lo] << ',' << d[d_hi] << ','
          << d[d_bf] << ',' << d[d_dir] << '\n';
        common += r.nmd && r.lrbh;
    }
    out(ctx) << "report: NMD " << nmd.size() << ", LRBH " << lrbh.size() << ", common " << common << " -> "
             << (dir / "comparison.csv").string() << '\n';
}

void cmd_simulate(const Context& ctx) {
    const auto& c = ctx.config;
    const auto dir = prepare_output(c);
    const int m = static_cast<int>(c.integer("simulate.m"));
    const int strands = static_cast<int>(c.integer("simulate.strands"));
    if (m < 1 || strands < 1) throw ValidationError(kModule, "simulate.m and simulate.strands must be positive");
    const auto names = synthetic_mirna_names(m);
    const auto annotation = synthetic_annotation(names, strands, c.real("simulate.length"), derived_seed(c.seed(), "layout"));

    SimulationSpec spec;
    spec.n = static_cast<int>(c.integer("simulate.n"));
    spec.priors = c.priors();
    spec.jitter = c.jitter();
    spec.delta2 = c.real("simulate.delta2");
    spec.control_mean = c.real("simulate.control_mean");
    spec.control_sd = c.real("simulate.control_sd");
    spec.seed = derived_seed(c.seed(), "simulate");
    if (!c.str("simulate.dof").empty()) spec.dof = c.real("simulate.dof");
    const bool fixed_h = !c.str("simulate.varrho2").empty() || !c.str("simulate.nu").empty() || !c.str("simulate.rho").empty();
    if (fixed_h) {
        for (const char* key : {"simulate.varrho2", "simulate.nu", "simulate.rho"}) {
            if (c.str(key).empty()) throw ValidationError(kModule, "set all of simulate.varrho2, nu and rho, or none");
        }
        StrandHyperParams h{c.real("simulate.varrho2"), c.real("simulate.nu"), c.real("simulate.rho")};
        if (!h.valid()) throw ValidationError(kModule, "simulate hyperparameters must be positive");
        spec.hypers = std::vector<StrandHyperParams>(static_cast<std::size_t>(annotation.k()), h);
    }
    const auto sim = simulate_dataset(annotation, names, spec);

    write_expression_csv(dir / "case.csv", sim.data.patient_ids, names, sim.data.case_ct);
    write_expression_csv(dir / "control.csv", sim.data.patient_ids, names, sim.data.control_ct);
    write_annotation_csv(dir / "annotation.csv", annotation);
    write_lengths_csv(dir / "lengths.csv", annotation);
    {
        std::map<std::string, std::string> strand_of;
        for (const auto& s : annotation.strands) {
            for (const auto& l : s.loci) strand_of[l.mirna] = s.id;
        }
        std::ofstream t(dir / "truth.csv");
        t << "mirna,strand,psi,h1\n";
        for (int i = 0; i < m; ++i) {
            t << names[static_cast<std::size_t>(i)] << ',' << strand_of[names[static_cast<std::size_t>(i)]] << ','
              << csv::format_number(sim.psi(i)) << ',' << (std::abs(sim.psi(i)) > 1.0 ? 1 : 0) << '\n';
        }
    }
    json m_json = manifest_base(ctx, "simulate");
    json hyp = json::array();
    for (std::size_t l = 0; l < sim.hypers.size(); ++l) {
        hyp.push_back({{"strand", annotation.strands[l].id},
                       {"varrho2", sim.hypers[l].varrho2},
                       {"nu", sim.hypers[l].nu},
                       {"rho", sim.hypers[l].rho}});
    }
    m_json["truth"] = {{"delta2", sim.delta2}, {"hyperparameters", hyp}};
    write_json(dir / "manifest_simulate.json", m_json);
    int h1 = 0;
    for (int i = 0; i < m; ++i) h1 += std::abs(sim.psi(i)) > 1.0;
    out(ctx) << "simulate: n=" << spec.n << " m=" << m << " strands=" << annotation.k() << ", " << h1
             << " miRNAs with |psi| > 1, files in " << dir.string() << '\n';
}

}  // namespace nmde::cli
