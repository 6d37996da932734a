#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmde/linalg.hpp"

namespace nmde {

/// Paired case/control delta-Ct matrices (patients x miRNAs) and their
/// difference z = case - control.
struct ExpressionDataset {
    std::vector<std::string> patient_ids;
    std::vector<std::string> mirna_names;
    Matrix case_ct;
    Matrix control_ct;
    Matrix z;

    [[nodiscard]] int n() const { return static_cast<int>(z.rows()); }
    [[nodiscard]] int m() const { return static_cast<int>(z.cols()); }
};

struct IngestOptions {
    /// Drop patients with a missing or non-finite cell instead of failing.
    bool drop_incomplete_patients = false;
};

/// Validates dimensions, names and finiteness, then computes z.
ExpressionDataset make_dataset(std::vector<std::string> patient_ids, std::vector<std::string> mirna_names,
                               Matrix case_ct, Matrix control_ct);

/// Reads two wide CSVs (`patient,<mirna>...`). Rows are aligned by patient id
/// and columns by miRNA name; the case file fixes the output order.
ExpressionDataset load_expression(const std::filesystem::path& case_path,
                                  const std::filesystem::path& control_path, const IngestOptions& options = {});

/// Writes a wide CSV with shortest round-trip number formatting.
void write_expression_csv(const std::filesystem::path& path, std::span<const std::string> patient_ids,
                          std::span<const std::string> mirna_names, const Matrix& values);

struct Locus {
    std::string mirna;
    double coordinate = 0.0;  // base pairs
};

/// One chromosome strand; loci sorted by coordinate.
struct Strand {
    std::string id;          // chromosome followed by '+' or '-'
    std::string chromosome;
    char sign = '+';
    double length = 0.0;     // base pairs
    std::vector<Locus> loci;
};

struct GenomeAnnotation {
    std::vector<Strand> strands;

    [[nodiscard]] int k() const { return static_cast<int>(strands.size()); }
    [[nodiscard]] int locus_count() const;
};

struct AnnotationRecord {
    std::string mirna;
    std::string chromosome;
    std::string strand;  // "+", "-" or U+2212
    double coordinate = 0.0;
};

/// Groups records into strands (sorted by strand id, loci by coordinate).
/// Strand length is the chromosome length when supplied, else the largest
/// coordinate on the strand.
GenomeAnnotation make_annotation(const std::vector<AnnotationRecord>& records,
                                 const std::map<std::string, double>& chromosome_lengths = {});

GenomeAnnotation load_annotation(const std::filesystem::path& path,
                                 const std::optional<std::filesystem::path>& lengths_path = std::nullopt);

/// Keeps only loci whose miRNA is in `mirna_names`, dropping emptied strands.
GenomeAnnotation restrict_annotation(const GenomeAnnotation& annotation, std::span<const std::string> mirna_names);

/// m x L incidence between miRNAs and annotated loci. Columns run strand by
/// strand, then by coordinate.
struct DesignMatrix {
    Matrix p;
    std::map<std::pair<std::string, double>, int> column_index;
    std::vector<int> column_mirna;   // row index carrying the 1 in each column
    std::vector<int> column_strand;  // strand index of each column
    std::vector<int> strand_offset;  // first column of each strand block

    [[nodiscard]] int m() const { return static_cast<int>(p.rows()); }
    [[nodiscard]] int l() const { return static_cast<int>(p.cols()); }
    /// Number of loci annotated for each miRNA (row sums of p).
    [[nodiscard]] std::vector<int> multiplicity() const;
};

/// Every locus must belong to a listed miRNA and every miRNA must have at
/// least one locus; violations raise ValidationError naming the offenders.
DesignMatrix build_design_matrix(const GenomeAnnotation& annotation, std::span<const std::string> mirna_names);

namespace csv {

std::vector<std::string> split_line(const std::string& line);
double parse_number(const std::string& text);
std::string format_number(double value);

}  // namespace csv

}  // namespace nmde
