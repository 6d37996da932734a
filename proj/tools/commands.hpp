#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace nmde::cli {

struct Context {
    RunConfig config;
    int threads = 1;
    std::ostream* out = nullptr;
};

void cmd_fit(const Context& ctx);
void cmd_test(const Context& ctx);
void cmd_lrbh(const Context& ctx);
void cmd_cv(const Context& ctx);
void cmd_report(const Context& ctx);
void cmd_simulate(const Context& ctx);

/// One miRNA in the union of both discovery sets.
struct ComparisonRow {
    std::string mirna;
    bool nmd = false;
    bool lrbh = false;

    /// "NMD", "LRBH" or "NMD, LRBH".
    [[nodiscard]] std::string method() const;
};

/// Union in `order`, keeping only names discovered by at least one method.
std::vector<ComparisonRow> merge_discoveries(const std::vector<std::string>& order,
                                             const std::vector<std::string>& nmd,
                                             const std::vector<std::string>& lrbh);

/// Independent seed for a named purpose, derived from the run seed.
std::uint64_t derived_seed(std::uint64_t seed, const std::string& purpose);

}  // namespace nmde::cli
