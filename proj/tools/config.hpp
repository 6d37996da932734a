#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nmde/lrbh.hpp"
#include "nmde/model_sampler.hpp"
#include "nmde/nonmarginal.hpp"
#include "nmde/predictive.hpp"
#include "nmde/priors.hpp"

namespace nmde::cli {

/// Flat "section.key" settings with a fixed schema. Every key has a documented
/// default; values are canonicalized on entry so equal settings hash equally.
class RunConfig {
public:
    RunConfig();

    /// INI file with [section] headers. Unknown sections or keys are errors.
    static RunConfig from_file(const std::filesystem::path& path);

    /// "section.key=value".
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }
    [[nodiscard]] const std::string& str(const std::string& key) const;
    [[nodiscard]] long integer(const std::string& key) const;
    [[nodiscard]] double real(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;

    /// Hash of every setting except the output directory.
    [[nodiscard]] std::string hash() const;

    [[nodiscard]] std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("run.seed")); }
    [[nodiscard]] std::filesystem::path output_dir() const { return str("paths.output"); }
    [[nodiscard]] std::filesystem::path samples_path() const;

    [[nodiscard]] SamplerConfig sampler(const std::string& section = "sampler") const;
    [[nodiscard]] UpdateMode update_mode() const;
    [[nodiscard]] PriorSettings priors() const;
    [[nodiscard]] JitterPolicy jitter() const;
    [[nodiscard]] GroupOptions groups() const;
    [[nodiscard]] CalibrationOptions calibration(int threads) const;
    [[nodiscard]] LrbhOptions lrbh(int threads) const;

    /// Text of the full schema with defaults, in INI form.
    static std::string default_ini();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace nmde::cli
