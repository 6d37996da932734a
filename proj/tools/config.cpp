#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nmde/errors.hpp"
#include "nmde/samples_io.hpp"

namespace nmde::cli {

namespace {

constexpr const char* kModule = "cli_reporting";

enum class Kind { integer, real, optional_real, flag, text, choice };

struct Entry {
    const char* key;
    Kind kind;
    const char* fallback;
    std::vector<std::string> choices = {};
};

const std::vector<Entry>& schema() {
    static const std::vector<Entry> s = {
        {"run.seed", Kind::integer, "20240101"},

        {"paths.case", Kind::text, ""},
        {"paths.control", Kind::text, ""},
        {"paths.annotation", Kind::text, ""},
        {"paths.lengths", Kind::text, ""},
        {"paths.output", Kind::text, "nmde-out"},
        {"paths.samples", Kind::text, ""},

        {"ingest.drop_incomplete_patients", Kind::flag, "false"},

        {"sampler.n_iterations", Kind::integer, "200000"},
        {"sampler.burn_in", Kind::integer, "50000"},
        {"sampler.thin", Kind::integer, "10"},
        {"sampler.chains", Kind::integer, "1"},
        {"sampler.accept_low", Kind::real, "0.2"},
        {"sampler.accept_high", Kind::real, "0.35"},
        {"sampler.adaptation_window", Kind::integer, "100"},
        {"sampler.update_mode", Kind::choice, "blocked", {"blocked", "joint"}},
        {"sampler.trace", Kind::choice, "hyper", {"none", "hyper", "all"}},

        {"priors.varrho_mode", Kind::real, "1"},
        {"priors.varrho_variance", Kind::real, "100"},
        {"priors.nu_mode", Kind::real, "1"},
        {"priors.nu_variance", Kind::real, "100"},
        {"priors.rho_variance", Kind::real, "1000"},
        {"priors.rho_variance_scale", Kind::choice, "natural", {"natural", "log"}},
        {"priors.varrho_prior_on", Kind::choice, "varrho2", {"varrho2", "varrho"}},
        {"priors.jitter_initial", Kind::real, "1e-10"},
        {"priors.jitter_max", Kind::real, "1e-06"},

        {"testing.target_fdr", Kind::real, "0.1"},
        {"testing.tolerance", Kind::real, "0.005"},
        {"testing.cap", Kind::integer, "5"},
        {"testing.percentile", Kind::real, "95"},
        {"testing.group_cap_includes_self", Kind::flag, "false"},
        {"testing.component_enum_limit", Kind::integer, "20"},
        {"testing.restarts", Kind::integer, "16"},
        {"testing.correlation_draws", Kind::integer, "2000"},
        {"testing.prior_draws", Kind::integer, "20000"},

        {"lrbh.replicates", Kind::integer, "10000"},
        {"lrbh.q", Kind::real, "0.1"},
        {"lrbh.method", Kind::choice, "lr-bootstrap", {"lr-bootstrap", "median-sign"}},
        {"lrbh.null_point", Kind::choice, "boundary", {"boundary", "constrained-mle"}},
        {"lrbh.randomize_ties", Kind::flag, "true"},

        {"cv.n_iterations", Kind::integer, "20000"},
        {"cv.burn_in", Kind::integer, "5000"},
        {"cv.thin", Kind::integer, "5"},
        {"cv.level", Kind::real, "0.75"},
        {"cv.folds", Kind::text, ""},

        {"simulate.m", Kind::integer, "50"},
        {"simulate.n", Kind::integer, "18"},
        {"simulate.strands", Kind::integer, "4"},
        {"simulate.length", Kind::real, "1000000"},
        {"simulate.delta2", Kind::real, "1"},
        {"simulate.dof", Kind::optional_real, ""},
        {"simulate.varrho2", Kind::optional_real, ""},
        {"simulate.nu", Kind::optional_real, ""},
        {"simulate.rho", Kind::optional_real, ""},
        {"simulate.control_mean", Kind::real, "25"},
        {"simulate.control_sd", Kind::real, "1"},
    };
    return s;
}

const Entry& lookup(const std::string& key) {
    for (const auto& e : schema()) {
        if (key == e.key) return e;
    }
    throw ValidationError(kModule, "unknown setting '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string canonical(const Entry& e, const std::string& raw) {
    const std::string v = trim(raw);
    auto bad = [&](const std::string& what) -> std::string {
        throw ValidationError(kModule, std::string(e.key) + ": '" + v + "' is not " + what);
    };
    switch (e.kind) {
        case Kind::integer: {
            long x = 0;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || p != v.data() + v.size()) {
                // accept integral reals such as 2e5
                double d = 0.0;
                try {
                    d = csv::parse_number(v);
                } catch (const Error&) {
                    return bad("an integer");
                }
                if (d != std::floor(d) || std::abs(d) > 9e15) return bad("an integer");
                x = static_cast<long>(d);
            }
            return std::to_string(x);
        }
        case Kind::optional_real:
            if (v.empty()) return "";
            [[fallthrough]];
        case Kind::real: {
            try {
                return csv::format_number(csv::parse_number(v));
            } catch (const Error&) {
                return bad("a number");
            }
        }
        case Kind::flag: {
            std::string l = v;
            std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
            if (l == "true" || l == "1" || l == "yes" || l == "on") return "true";
            if (l == "false" || l == "0" || l == "no" || l == "off") return "false";
            return bad("a boolean");
        }
        case Kind::choice:
            if (std::find(e.choices.begin(), e.choices.end(), v) == e.choices.end()) {
                std::string opts;
                for (const auto& c : e.choices) opts += (opts.empty() ? "" : "|") + c;
                return bad("one of " + opts);
            }
            return v;
        case Kind::text:
            return v;
    }
    return v;
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& e : schema()) values_[e.key] = canonical(e, e.fallback);
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError(kModule, "config file not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError(kModule, e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ValidationError(kModule, "setting '" + section + "' is outside any section");
        for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
    }
    // relative paths are taken relative to the config file
    const auto base = std::filesystem::absolute(path).parent_path();
    for (auto& [key, value] : c.values_) {
        if (key.rfind("paths.", 0) == 0 && !value.empty() && std::filesystem::path(value).is_relative()) {
            value = (base / value).lexically_normal().string();
        }
    }
    return c;
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError(kModule, "override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::set(const std::string& key, const std::string& value) {
    values_[key] = canonical(lookup(key), value);
}

const std::string& RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError(kModule, "unknown setting '" + key + "'");
    return it->second;
}

long RunConfig::integer(const std::string& key) const { return std::stol(str(key)); }

double RunConfig::real(const std::string& key) const {
    const auto& v = str(key);
    if (v.empty()) throw ValidationError(kModule, key + " is not set");
    return csv::parse_number(v);
}

bool RunConfig::flag(const std::string& key) const { return str(key) == "true"; }

std::string RunConfig::hash() const {
    auto v = values_;
    v.erase("paths.output");
    return config_hash(v);
}

std::filesystem::path RunConfig::samples_path() const {
    const auto& s = str("paths.samples");
    return s.empty() ? output_dir() / "samples.csv" : std::filesystem::path(s);
}

SamplerConfig RunConfig::sampler(const std::string& section) const {
    SamplerConfig s;
    s.n_iterations = integer(section + ".n_iterations");
    s.burn_in = integer(section + ".burn_in");
    s.thin = integer(section + ".thin");
    s.seed = seed();
    s.accept_low = real("sampler.accept_low");
    s.accept_high = real("sampler.accept_high");
    s.adaptation_window = integer("sampler.adaptation_window");
    s.validate();
    return s;
}

UpdateMode RunConfig::update_mode() const {
    return str("sampler.update_mode") == "joint" ? UpdateMode::joint : UpdateMode::blocked;
}

PriorSettings RunConfig::priors() const {
    PriorSettings p;
    p.varrho_mode = real("priors.varrho_mode");
    p.varrho_variance = real("priors.varrho_variance");
    p.nu_mode = real("priors.nu_mode");
    p.nu_variance = real("priors.nu_variance");
    p.rho_variance = real("priors.rho_variance");
    p.rho_variance_scale = str("priors.rho_variance_scale") == "log" ? RhoVarianceScale::log : RhoVarianceScale::natural;
    p.varrho_prior_on = str("priors.varrho_prior_on") == "varrho" ? VarrhoPriorOn::varrho : VarrhoPriorOn::varrho2;
    return p;
}

GroupOptions RunConfig::groups() const {
    GroupOptions g;
    g.cap = static_cast<int>(integer("testing.cap"));
    g.percentile = real("testing.percentile");
    g.cap_includes_self = flag("testing.group_cap_includes_self");
    return g;
}

CalibrationOptions RunConfig::calibration(int threads) const {
    CalibrationOptions c;
    c.target_fdr = real("testing.target_fdr");
    c.tolerance = real("testing.tolerance");
    c.optimizer.component_enum_limit = static_cast<int>(integer("testing.component_enum_limit"));
    c.optimizer.restarts = static_cast<int>(integer("testing.restarts"));
    c.optimizer.seed = seed();
    c.optimizer.threads = threads;
    return c;
}

LrbhOptions RunConfig::lrbh(int threads) const {
    LrbhOptions o;
    o.bootstrap.replicates = static_cast<int>(integer("lrbh.replicates"));
    o.bootstrap.null_point = str("lrbh.null_point") == "boundary" ? NullPoint::boundary : NullPoint::constrained_mle;
    o.bootstrap.randomize_ties = flag("lrbh.randomize_ties");
    o.q = real("lrbh.q");
    o.method = str("lrbh.method") == "median-sign" ? LrbhMethod::median_sign : LrbhMethod::lr_bootstrap;
    o.seed = seed();
    o.threads = threads;
    return o;
}

JitterPolicy RunConfig::jitter() const {
    return {real("priors.jitter_initial"), real("priors.jitter_max")};
}

std::string RunConfig::default_ini() {
    std::ostringstream out;
    std::string section;
    for (const auto& e : schema()) {
        const std::string key = e.key;
        const auto dot = key.find('.');
        const auto s = key.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
            section = s;
        }
        if (!e.choices.empty()) {
            out << "; ";
            for (std::size_t i = 0; i < e.choices.size(); ++i) out << (i ? " | " : "") << e.choices[i];
            out << '\n';
        }
        out << key.substr(dot + 1) << " = " << e.fallback << '\n';
    }
    return out.str();
}

}  // namespace nmde::cli
