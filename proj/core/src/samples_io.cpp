#include "nmde/samples_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nmde/errors.hpp"

namespace nmde {

namespace {

constexpr const char* kModule = "cli_reporting";
constexpr const char* kMagic = "nmde-samples";

}  // namespace

void write_samples(const std::filesystem::path& path, const PosteriorSamples& samples) {
    std::ofstream out(path);
    if (!out) throw ValidationError(kModule, "cannot write " + path.string());
    out << kMagic << " 1 " << samples.m << ' ' << samples.k << ' ' << samples.size() << ' ' << samples.burn_in << ' '
        << samples.thin << '\n';
    for (std::size_t c = 0; c < samples.parameter_names.size(); ++c) {
        out << (c ? "," : "") << samples.parameter_names[c];
    }
    out << '\n';
    for (Eigen::Index t = 0; t < samples.draws.rows(); ++t) {
        for (Eigen::Index c = 0; c < samples.draws.cols(); ++c) {
            out << (c ? "," : "") << csv::format_number(samples.draws(t, c));
        }
        out << '\n';
    }
    if (!out) throw ValidationError(kModule, "failed writing " + path.string());
}

PosteriorSamples read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(kModule, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    long rows = 0;
    PosteriorSamples s;
    if (!(head >> magic >> version >> s.m >> s.k >> rows >> s.burn_in >> s.thin) || magic != kMagic || version != 1) {
        throw ValidationError(kModule, path.string() + ": not a samples file");
    }
    const int cols = ModelState::packed_size(s.m, s.k);
    std::getline(in, line);
    s.parameter_names = csv::split_line(line);
    if (static_cast<int>(s.parameter_names.size()) != cols) {
        throw ValidationError(kModule, path.string() + ": header does not match m and k");
    }
    s.draws.resize(rows, cols);
    for (long t = 0; t < rows; ++t) {
        if (!std::getline(in, line)) throw ValidationError(kModule, path.string() + ": truncated");
        const auto fields = csv::split_line(line);
        if (static_cast<int>(fields.size()) != cols) {
            throw ValidationError(kModule, path.string() + ": row " + std::to_string(t + 1) + " has wrong field count");
        }
        for (int c = 0; c < cols; ++c) s.draws(t, c) = csv::parse_number(fields[static_cast<std::size_t>(c)]);
    }
    return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const std::map<std::string, std::string>& settings) {
    std::string canon;
    for (const auto& [k, v] : settings) canon += k + "=" + v + "\n";
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
}

}  // namespace nmde
