#include <CLI11.hpp>

#include <iostream>

#include "sew/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Self-evolving multi-agent workflows for code generation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::int64_t> seed;
    bool baseline = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Override output_dir");
        sub->add_option("--seed", seed, "Override seed");
    };
    auto* generate = app.add_subcommand("generate", "Generate default workflows from the template");
    auto* evolve = app.add_subcommand("evolve", "Evolve the workflow and its agents");
    auto* eval = app.add_subcommand("eval", "Evaluate a workflow (or the single-agent baseline) with pass@k");
    auto* search = app.add_subcommand("search", "Exhaustive sweep over schemes, mutation prompts and methods");
    for (auto* sub : {generate, evolve, eval, search}) add_common(sub);
    eval->add_flag("--baseline", baseline, "Evaluate the one-step code generation baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : sew::kExitConfig;
    }

    sew::RunConfig config;
    try {
        config = sew::load_config(config_path);
    } catch (const sew::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sew::exit_code_for(e);
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (seed) config.seed = *seed;

    const std::string command = app.get_subcommands().front()->get_name();
    return sew::run_command(command, config, baseline, nullptr, std::cerr);
}
