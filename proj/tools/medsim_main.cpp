#include "medsim/error.hpp"
#include "medsim/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> output_dir;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--threads", o.threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--output-dir", o.output_dir, "Override the output directory");
}

int run(const std::string& path, const Overrides& o) {
    using namespace medsim;
    try {
        pipeline::RunConfig cfg = pipeline::load_config(path);
        if (o.seed) cfg.seed = *o.seed;
        if (o.threads) cfg.threads = *o.threads;
        if (o.output_dir) cfg.output_dir = *o.output_dir;
        for (const auto& w : cfg.warnings) std::cerr << "medsim: " << w << "\n";
        const auto result = pipeline::run(cfg);
        for (std::size_t i = cfg.warnings.size(); i < result.warnings.size(); ++i) {
            std::cerr << "medsim: warning: " << result.warnings[i] << "\n";
        }
        pipeline::write_outputs(result, cfg.output_dir);
        std::cout << format_table(result.report);
        std::cout << "outputs written to " << cfg.output_dir.string() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "medsim: error: " << e.what() << "\n";
        return pipeline::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "medsim: internal error: " << e.what() << "\n";
        return 1;
    }
}

int validate(const std::string& path) {
    using namespace medsim::pipeline;
    try {
        const auto problems = validate_file(path);
        bool errors = false;
        for (const auto& p : problems) {
            std::cout << p.to_string() << "\n";
            errors = errors || p.severity == Problem::Severity::error;
        }
        if (problems.empty()) std::cout << "no problems found\n";
        return errors ? exit_code(medsim::ErrorKind::config) : 0;
    } catch (const std::exception& e) {
        std::cerr << "medsim: internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal mediation analysis by Monte Carlo simulation"};
    app.require_subcommand(1);

    std::string run_path, validate_path;
    Overrides run_overrides;
    auto* run_cmd = app.add_subcommand("run", "Fit models, estimate effects and write reports");
    run_cmd->add_option("config", run_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
    add_overrides(run_cmd, run_overrides);
    auto* validate_cmd = app.add_subcommand("validate", "Check a config and its data without running");
    validate_cmd->add_option("config", validate_path, "Config file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(medsim::ErrorKind::config);
    }
    if (*run_cmd) return run(run_path, run_overrides);
    return validate(validate_path);
}
