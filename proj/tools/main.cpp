#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "glucolens/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    bool verbose = false;
};

void add_common(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline configuration file (JSON)")
        ->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out_dir, "override the output directory");
    cmd->add_flag("--verbose", args.verbose, "chatty progress output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "glucolens: fuses activity, GPS, CGM and purchase streams onto a slot grid,"
        " finds lifestyle events, and benchmarks blood-glucose predictors"};
    app.require_subcommand(1);

    GlobalArgs args;
    std::vector<std::string> stages = glucolens::pipeline::stage_names();
    stages.push_back("all");
    for (const std::string& stage : stages) {
        CLI::App* cmd = app.add_subcommand(
            stage, stage == "all" ? "run every stage in dependency order"
                                  : "run the " + stage + " stage");
        add_common(cmd, args);
    }

    CLI11_PARSE(app, argc, argv);
    std::string chosen = app.get_subcommands().front()->get_name();

    try {
        glucolens::pipeline::PipelineConfig cfg =
            glucolens::pipeline::load_config(args.config_path);
        if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
        if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
        cfg.verbose = cfg.verbose || args.verbose;
        if (chosen == "all")
            glucolens::pipeline::run_all(cfg);
        else
            glucolens::pipeline::run_stage(cfg, chosen);
    } catch (const glucolens::pipeline::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
