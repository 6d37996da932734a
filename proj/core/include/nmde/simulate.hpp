#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmde/data_ingest.hpp"
#include "nmde/matern.hpp"
#include "nmde/priors.hpp"

namespace nmde {

/// Names "miR-sim-1", ..., "miR-sim-m".
std::vector<std::string> synthetic_mirna_names(int m);

/// One locus per miRNA, miRNAs dealt round-robin over `strands` strands
/// (chr1+, chr1-, chr2+, ...) at uniform coordinates in [1, length].
GenomeAnnotation synthetic_annotation(const std::vector<std::string>& mirna_names, int strands, double length,
                                      std::uint64_t seed);

struct SimulationSpec {
    int n = 20;
    /// Fixed strand hyperparameters; drawn from the hyperpriors when absent.
    std::optional<std::vector<StrandHyperParams>> hypers;
    PriorSettings priors;
    double delta2 = 1.0;
    /// Inverse-Wishart degrees of freedom; m + 3 when absent.
    std::optional<double> dof;
    /// Fixed psi; drawn from its Gaussian-process prior when absent.
    std::optional<Vector> psi;
    double control_mean = 25.0;
    double control_sd = 1.0;
    std::uint64_t seed = 1;
    JitterPolicy jitter;
};

struct SimulatedData {
    ExpressionDataset data;
    Vector psi;
    std::vector<StrandHyperParams> hypers;
    Matrix sigma;
    double delta2 = 1.0;
};

/// Draws hyperparameters, psi ~ N(0, P W P'), Sigma ~ IW(dof, delta^2 I) and
/// n rows z_j ~ N(psi, Sigma); controls are iid normal and cases = controls + z.
SimulatedData simulate_dataset(const GenomeAnnotation& annotation, const std::vector<std::string>& mirna_names,
                               const SimulationSpec& spec);

/// `mirna,chromosome,strand,coordinate`
void write_annotation_csv(const std::filesystem::path& path, const GenomeAnnotation& annotation);
/// `chromosome,length`
void write_lengths_csv(const std::filesystem::path& path, const GenomeAnnotation& annotation);

}  // namespace nmde
