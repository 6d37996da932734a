#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "nmde/model_sampler.hpp"

namespace nmde {

/// Text format, one draw per line after a two-line header:
///
///     nmde-samples 1 <m> <k> <draws> <burn_in> <thin>
///     <comma-separated parameter names>
///     <comma-separated values, shortest round-trip decimal>
///
/// Values are in sampler coordinates, so a read-back is bit-identical.
void write_samples(const std::filesystem::path& path, const PosteriorSamples& samples);
PosteriorSamples read_samples(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

/// FNV-1a over the canonical "key=value\n" lines in key order, as 16 hex digits.
std::string config_hash(const std::map<std::string, std::string>& settings);

}  // namespace nmde
