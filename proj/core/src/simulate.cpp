#include "nmde/simulate.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "nmde/errors.hpp"
#include "nmde/genome_model.hpp"
#include "nmde/predictive.hpp"
#include "nmde/rng.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "simulate";

}  // namespace

std::vector<std::string> synthetic_mirna_names(int m) {
    std::vector<std::string> names;
    for (int i = 1; i <= m; ++i) names.push_back("miR-sim-" + std::to_string(i));
    return names;
}

GenomeAnnotation synthetic_annotation(const std::vector<std::string>& mirna_names, int strands, double length,
                                      std::uint64_t seed) {
    if (strands < 1 || !(length >= 1.0)) throw ValidationError(kModule, "need at least one strand of positive length");
    Rng rng = make_stream(seed, 0);
    std::vector<AnnotationRecord> records;
    std::map<std::string, double> lengths;
    for (std::size_t i = 0; i < mirna_names.size(); ++i) {
        const auto s = static_cast<int>(i % static_cast<std::size_t>(strands));
        const std::string chrom = "chr" + std::to_string(s / 2 + 1);
        lengths[chrom] = length;
        const double coord = std::floor(1.0 + uniform01(rng) * (length - 1.0));
        records.push_back({mirna_names[i], chrom, s % 2 == 0 ? "+" : "-", coord});
    }
    return make_annotation(records, lengths);
}

SimulatedData simulate_dataset(const GenomeAnnotation& annotation, const std::vector<std::string>& mirna_names,
                               const SimulationSpec& spec) {
    const int m = static_cast<int>(mirna_names.size());
    if (spec.n < 1 || m < 1) throw ValidationError(kModule, "need at least one patient and one miRNA");
    if (!(spec.delta2 > 0.0) || !(spec.control_sd >= 0.0)) throw ValidationError(kModule, "scales must be positive");
    const double dof = spec.dof.value_or(m + 3.0);

    Rng rng = make_stream(spec.seed, 1);
    SimulatedData out;
    out.delta2 = spec.delta2;
    const auto design = build_design_matrix(annotation, mirna_names);
    GenomeModel genome(annotation, design);

    if (spec.hypers) {
        if (static_cast<int>(spec.hypers->size()) != annotation.k()) {
            throw ValidationError(kModule, "one hyperparameter set per strand is required");
        }
        out.hypers = *spec.hypers;
    } else {
        out.hypers = make_strand_priors(annotation, spec.priors).draw_hypers(rng);
    }

    if (spec.psi) {
        if (spec.psi->size() != m) throw ValidationError(kModule, "psi has the wrong length");
        out.psi = *spec.psi;
    } else {
        auto f = genome.factor(out.hypers, spec.jitter);
        if (!f) throw NumericalError(kModule, "prior covariance of psi is not positive definite");
        out.psi = genome.draw_psi(*f, rng);
    }

    out.sigma = sample_inverse_wishart(dof, spec.delta2 * Matrix::Identity(m, m), rng);
    Eigen::LLT<Matrix> llt(out.sigma);
    if (llt.info() != Eigen::Success) throw NumericalError(kModule, "sampled covariance is not positive definite");
    const Matrix l = llt.matrixL();

    Matrix z(spec.n, m), control(spec.n, m);
    for (int j = 0; j < spec.n; ++j) {
        Vector xi(m);
        for (auto& v : xi) v = std_normal(rng);
        z.row(j) = (out.psi + l * xi).transpose();
        for (int i = 0; i < m; ++i) control(j, i) = spec.control_mean + spec.control_sd * std_normal(rng);
    }
    std::vector<std::string> patients;
    for (int j = 1; j <= spec.n; ++j) patients.push_back("P" + std::to_string(j));
    out.data = make_dataset(patients, mirna_names, control + z, control);
    return out;
}

void write_annotation_csv(const std::filesystem::path& path, const GenomeAnnotation& annotation) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "mirna,chromosome,strand,coordinate\n";
    for (const auto& s : annotation.strands) {
        for (const auto& l : s.loci) {
            out << l.mirna << ',' << s.chromosome << ',' << s.sign << ',' << csv::format_number(l.coordinate) << '\n';
        }
    }
}

void write_lengths_csv(const std::filesystem::path& path, const GenomeAnnotation& annotation) {
    std::map<std::string, double> lengths;
    for (const auto& s : annotation.strands) lengths[s.chromosome] = s.length;
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << "chromosome,length\n";
    for (const auto& [c, l] : lengths) out << c << ',' << csv::format_number(l) << '\n';
}

}  // namespace nmde
