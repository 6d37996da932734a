#include "nmde/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/tokenizer.hpp>

#include "nmde/errors.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "data_ingest";

[[noreturn]] void fail(const std::string& what) { throw ValidationError(kModule, what); }

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            // UTF-8 byte order mark
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            first = false;
        }
        if (trim(line).empty()) continue;
        rows.push_back(csv::split_line(line));
    }
    if (rows.empty()) fail(path.string() + " is empty");
    return rows;
}

bool is_missing_token(const std::string& s) {
    static const std::set<std::string> tokens{"", "NA", "na", "NaN", "nan", "NAN", "null", "NULL"};
    return tokens.count(s) > 0;
}

struct WideTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    Matrix values;
    std::vector<bool> incomplete;
};

WideTable read_wide(const std::filesystem::path& path) {
    auto rows = read_csv(path);
    const auto& header = rows.front();
    if (header.size() < 2) fail(path.string() + ": header needs a patient column and at least one miRNA");

    WideTable t;
    t.cols.assign(header.begin() + 1, header.end());
    std::set<std::string> seen;
    for (const auto& c : t.cols) {
        if (c.empty()) fail(path.string() + ": empty miRNA name in header");
        if (!seen.insert(c).second) fail(path.string() + ": duplicate miRNA column '" + c + "'");
    }

    const auto n = rows.size() - 1;
    const auto m = t.cols.size();
    t.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    t.incomplete.assign(n, false);
    std::set<std::string> patients;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = rows[r + 1];
        if (row.size() != m + 1) {
            fail(path.string() + ": row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                 " fields, expected " + std::to_string(m + 1));
        }
        if (!patients.insert(row[0]).second) fail(path.string() + ": duplicate patient id '" + row[0] + "'");
        t.rows.push_back(row[0]);
        for (std::size_t c = 0; c < m; ++c) {
            const auto& cell = row[c + 1];
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!is_missing_token(cell)) {
                try {
                    v = csv::parse_number(cell);
                } catch (const ValidationError&) {
                    fail(path.string() + ": non-numeric cell '" + cell + "' (patient " + row[0] + ", miRNA " +
                         t.cols[c] + ")");
                }
            }
            if (!std::isfinite(v)) t.incomplete[r] = true;
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return t;
}

}  // namespace

namespace csv {

std::vector<std::string> split_line(const std::string& line) {
    using Sep = boost::escaped_list_separator<char>;
    boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
    std::vector<std::string> out;
    for (const auto& field : tok) out.push_back(trim(field));
    return out;
}

double parse_number(const std::string& text) {
    const std::string s = trim(text);
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError(kModule, "not a number: '" + s + "'");
    }
    return v;
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace csv

ExpressionDataset make_dataset(std::vector<std::string> patient_ids, std::vector<std::string> mirna_names,
                               Matrix case_ct, Matrix control_ct) {
    if (case_ct.rows() != control_ct.rows() || case_ct.cols() != control_ct.cols()) {
        fail("case and control matrices differ in shape");
    }
    if (static_cast<Eigen::Index>(patient_ids.size()) != case_ct.rows()) fail("patient id count does not match rows");
    if (static_cast<Eigen::Index>(mirna_names.size()) != case_ct.cols()) fail("miRNA name count does not match columns");
    std::set<std::string> seen;
    for (const auto& name : mirna_names) {
        if (!seen.insert(name).second) fail("duplicate miRNA name '" + name + "'");
    }
    if (!case_ct.allFinite() || !control_ct.allFinite()) fail("non-finite expression value");

    ExpressionDataset ds;
    ds.patient_ids = std::move(patient_ids);
    ds.mirna_names = std::move(mirna_names);
    ds.z = case_ct - control_ct;
    ds.case_ct = std::move(case_ct);
    ds.control_ct = std::move(control_ct);
    return ds;
}

ExpressionDataset load_expression(const std::filesystem::path& case_path,
                                  const std::filesystem::path& control_path, const IngestOptions& options) {
    WideTable cases = read_wide(case_path);
    WideTable controls = read_wide(control_path);

    if (cases.cols.size() != controls.cols.size() || cases.rows.size() != controls.rows.size()) {
        fail("dimension mismatch between " + case_path.string() + " (" + std::to_string(cases.rows.size()) + "x" +
             std::to_string(cases.cols.size()) + ") and " + control_path.string() + " (" +
             std::to_string(controls.rows.size()) + "x" + std::to_string(controls.cols.size()) + ")");
    }

    std::unordered_map<std::string, Eigen::Index> control_col;
    for (std::size_t c = 0; c < controls.cols.size(); ++c) control_col[controls.cols[c]] = static_cast<Eigen::Index>(c);
    std::vector<Eigen::Index> col_map;
    for (const auto& name : cases.cols) {
        auto it = control_col.find(name);
        if (it == control_col.end()) fail("miRNA '" + name + "' missing from control file");
        col_map.push_back(it->second);
    }

    std::unordered_map<std::string, Eigen::Index> control_row;
    for (std::size_t r = 0; r < controls.rows.size(); ++r) control_row[controls.rows[r]] = static_cast<Eigen::Index>(r);
    std::vector<Eigen::Index> row_map;
    for (const auto& id : cases.rows) {
        auto it = control_row.find(id);
        if (it == control_row.end()) fail("patient sets differ: '" + id + "' missing from control file");
        row_map.push_back(it->second);
    }

    const auto m = static_cast<Eigen::Index>(cases.cols.size());
    std::vector<std::string> kept_ids;
    std::vector<Eigen::Index> kept_rows;
    for (std::size_t r = 0; r < cases.rows.size(); ++r) {
        const bool incomplete = cases.incomplete[r] || controls.incomplete[static_cast<std::size_t>(row_map[r])];
        if (incomplete) {
            if (!options.drop_incomplete_patients) {
                fail("missing or non-finite value for patient '" + cases.rows[r] +
                     "' (use --drop-incomplete-patients to drop such rows)");
            }
            continue;
        }
        kept_ids.push_back(cases.rows[r]);
        kept_rows.push_back(static_cast<Eigen::Index>(r));
    }
    if (kept_rows.empty()) fail("no complete patients remain");

    const auto n = static_cast<Eigen::Index>(kept_rows.size());
    Matrix case_ct(n, m), control_ct(n, m);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto src = kept_rows[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < m; ++c) {
            case_ct(r, c) = cases.values(src, c);
            control_ct(r, c) = controls.values(row_map[static_cast<std::size_t>(src)], col_map[static_cast<std::size_t>(c)]);
        }
    }
    return make_dataset(std::move(kept_ids), cases.cols, std::move(case_ct), std::move(control_ct));
}

void write_expression_csv(const std::filesystem::path& path, std::span<const std::string> patient_ids,
                          std::span<const std::string> mirna_names, const Matrix& values) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path.string());
    out << "patient";
    for (const auto& name : mirna_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        out << patient_ids[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << csv::format_number(values(r, c));
        out << '\n';
    }
}

int GenomeAnnotation::locus_count() const {
    int total = 0;
    for (const auto& s : strands) total += static_cast<int>(s.loci.size());
    return total;
}

GenomeAnnotation make_annotation(const std::vector<AnnotationRecord>& records,
                                 const std::map<std::string, double>& chromosome_lengths) {
    std::map<std::string, Strand> by_id;
    for (const auto& rec : records) {
        char sign = 0;
        const std::string s = trim(rec.strand);
        if (s == "+") {
            sign = '+';
        } else if (s == "-" || s == "\xE2\x88\x92") {
            sign = '-';
        } else {
            fail("unknown strand symbol '" + rec.strand + "' for " + rec.mirna);
        }
        if (!(rec.coordinate > 0.0) || !std::isfinite(rec.coordinate)) {
            fail("non-positive coordinate for " + rec.mirna + " on " + rec.chromosome);
        }
        if (rec.mirna.empty() || rec.chromosome.empty()) fail("empty miRNA or chromosome name");
        const std::string id = rec.chromosome + sign;
        auto& strand = by_id[id];
        strand.id = id;
        strand.chromosome = rec.chromosome;
        strand.sign = sign;
        strand.loci.push_back({rec.mirna, rec.coordinate});
    }

    GenomeAnnotation out;
    for (auto& [id, strand] : by_id) {
        std::stable_sort(strand.loci.begin(), strand.loci.end(),
                         [](const Locus& a, const Locus& b) { return a.coordinate < b.coordinate; });
        for (std::size_t i = 1; i < strand.loci.size(); ++i) {
            if (strand.loci[i].coordinate == strand.loci[i - 1].coordinate) {
                fail("duplicate locus on " + id + " at " + csv::format_number(strand.loci[i].coordinate) + " (" +
                     strand.loci[i - 1].mirna + ", " + strand.loci[i].mirna + ")");
            }
        }
        const double max_coord = strand.loci.back().coordinate;
        if (auto it = chromosome_lengths.find(strand.chromosome); it != chromosome_lengths.end()) {
            if (!(it->second > 0.0)) fail("non-positive length for chromosome " + strand.chromosome);
            strand.length = it->second;
        } else {
            strand.length = max_coord;
        }
        out.strands.push_back(std::move(strand));
    }
    return out;
}

GenomeAnnotation load_annotation(const std::filesystem::path& path,
                                 const std::optional<std::filesystem::path>& lengths_path) {
    auto rows = read_csv(path);
    const auto& header = rows.front();
    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) fail(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_mirna = column("mirna");
    const auto c_chrom = column("chromosome");
    const auto c_strand = column("strand");
    const auto c_coord = column("coordinate");

    std::vector<AnnotationRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) fail(path.string() + ": row " + std::to_string(r + 1) + " has wrong field count");
        records.push_back({row[c_mirna], row[c_chrom], row[c_strand], csv::parse_number(row[c_coord])});
    }

    std::map<std::string, double> lengths;
    if (lengths_path) {
        auto lrows = read_csv(*lengths_path);
        const auto& lh = lrows.front();
        auto lc = [&](const std::string& name) -> std::size_t {
            auto it = std::find(lh.begin(), lh.end(), name);
            if (it == lh.end()) fail(lengths_path->string() + ": missing column '" + name + "'");
            return static_cast<std::size_t>(it - lh.begin());
        };
        const auto c_c = lc("chromosome");
        const auto c_l = lc("length");
        for (std::size_t r = 1; r < lrows.size(); ++r) {
            if (lrows[r].size() != lh.size()) fail(lengths_path->string() + ": wrong field count");
            lengths[lrows[r][c_c]] = csv::parse_number(lrows[r][c_l]);
        }
    }
    return make_annotation(records, lengths);
}

GenomeAnnotation restrict_annotation(const GenomeAnnotation& annotation, std::span<const std::string> mirna_names) {
    const std::set<std::string> keep(mirna_names.begin(), mirna_names.end());
    GenomeAnnotation out;
    for (const auto& strand : annotation.strands) {
        Strand s = strand;
        s.loci.clear();
        for (const auto& locus : strand.loci) {
            if (keep.count(locus.mirna)) s.loci.push_back(locus);
        }
        if (!s.loci.empty()) out.strands.push_back(std::move(s));
    }
    return out;
}

std::vector<int> DesignMatrix::multiplicity() const {
    std::vector<int> q(static_cast<std::size_t>(m()), 0);
    for (int row : column_mirna) ++q[static_cast<std::size_t>(row)];
    return q;
}

DesignMatrix build_design_matrix(const GenomeAnnotation& annotation, std::span<const std::string> mirna_names) {
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = 0; i < mirna_names.size(); ++i) row_of[mirna_names[i]] = static_cast<int>(i);

    DesignMatrix dm;
    const int m = static_cast<int>(mirna_names.size());
    const int l = annotation.locus_count();
    dm.p = Matrix::Zero(m, l);

    std::set<std::string> unknown;
    int col = 0;
    for (int s = 0; s < annotation.k(); ++s) {
        const auto& strand = annotation.strands[static_cast<std::size_t>(s)];
        dm.strand_offset.push_back(col);
        for (const auto& locus : strand.loci) {
            auto it = row_of.find(locus.mirna);
            if (it == row_of.end()) {
                unknown.insert(locus.mirna);
                dm.column_mirna.push_back(-1);
            } else {
                dm.p(it->second, col) = 1.0;
                dm.column_mirna.push_back(it->second);
            }
            dm.column_strand.push_back(s);
            dm.column_index[{strand.id, locus.coordinate}] = col;
            ++col;
        }
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
        fail("annotated miRNAs absent from the expression data (restrict the annotation first): " + list);
    }

    std::string unannotated;
    int count = 0;
    for (int i = 0; i < m; ++i) {
        if (dm.p.row(i).sum() == 0.0) {
            if (count < 20) unannotated += (unannotated.empty() ? "" : ", ") + mirna_names[static_cast<std::size_t>(i)];
            ++count;
        }
    }
    if (count > 0) {
        if (count > 20) unannotated += ", ... (" + std::to_string(count) + " total)";
        fail("unannotated miRNAs: " + unannotated);
    }
    return dm;
}

}  // namespace nmde
