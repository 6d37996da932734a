#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "nmde/errors.hpp"
#include "nmde/parallel.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian non-marginal differential expression of miRNAs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    long long seed = -1;
    int threads = 0;
    app.add_option("-c,--config", config_path, "INI configuration file");
    app.add_option("-s,--set", overrides, "Override a setting, e.g. --set sampler.thin=5");
    app.add_option("-o,--output", output, "Output directory (paths.output)");
    app.add_option("--seed", seed, "Run seed (run.seed)");
    app.add_option("-j,--threads", threads, "Worker threads (default: NMDE_THREADS or hardware concurrency)");

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const nmde::cli::Context&);
    };
    const std::vector<Command> commands = {
        {"fit", "Sample the joint posterior and write samples plus a manifest", nmde::cli::cmd_fit},
        {"test", "Non-marginal multiple testing from stored samples", nmde::cli::cmd_test},
        {"lrbh", "Likelihood-ratio bootstrap tests with Benjamini-Hochberg", nmde::cli::cmd_lrbh},
        {"cv", "Leave-one-out posterior predictive validation", nmde::cli::cmd_cv},
        {"report", "Merge NMD and LRBH discoveries", nmde::cli::cmd_report},
        {"simulate", "Generate a synthetic dataset from the model", nmde::cli::cmd_simulate},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help);
    app.add_subcommand("defaults", "Print every setting with its default as INI");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidation;
    }

    try {
        if (app.got_subcommand("defaults")) {
            std::cout << nmde::cli::RunConfig::default_ini();
            return 0;
        }
        nmde::cli::Context ctx;
        ctx.config = config_path.empty() ? nmde::cli::RunConfig() : nmde::cli::RunConfig::from_file(config_path);
        for (const auto& o : overrides) ctx.config.apply_override(o);
        if (!output.empty()) ctx.config.set("paths.output", output);
        if (seed >= 0) ctx.config.set("run.seed", std::to_string(seed));
        ctx.threads = threads > 0 ? threads : nmde::default_thread_count();
        ctx.out = &std::cout;
        for (const auto& c : commands) {
            if (app.got_subcommand(c.name)) c.run(ctx);
        }
    } catch (const nmde::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const nmde::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
