#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "plasthin/harness.hpp"

int main(int argc, char** argv) {
    if (const char* lvl = std::getenv("PLASTHIN_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

    CLI::App app{"Quasistatic elasto-plastic thin plates: h-model, two-scale limit and audits"};
    app.require_subcommand(1);

    std::string config, out, run_dir;
    std::uint64_t seed = 0;
    int jobs = 1;

    auto add_run = [&](const char* name, const char* help) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("--config,-c", config, "scenario JSON")->required()->check(CLI::ExistingFile);
        sc->add_option("--out,-o", out, "output directory (overrides the config)");
        sc->add_option("--seed", seed, "seed for the stability audit (overrides the config)");
        sc->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
        return sc;
    };
    auto* sim_h = add_run("simulate-h", "evolve the plate at the first listed thickness");
    auto* sim_hom = add_run("simulate-hom", "evolve the two-scale limit model");
    auto* conv = add_run("converge", "run every listed thickness against the limit model");
    auto* audit = app.add_subcommand("audit", "recheck the stress and energy records of a run directory");
    audit->add_option("run_dir", run_dir, "directory written by simulate-h or simulate-hom")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : plasthin::exit_code::config;
    }

    plasthin::RunOptions opt;
    opt.out_dir = out;
    opt.jobs = jobs;
    for (auto* sc : {sim_h, sim_hom, conv})
        if (sc->parsed() && sc->count("--seed") > 0) opt.seed = seed;

    if (sim_h->parsed()) return plasthin::cmd_simulate_h(config, opt);
    if (sim_hom->parsed()) return plasthin::cmd_simulate_hom(config, opt);
    if (conv->parsed()) return plasthin::cmd_converge(config, opt);
    return plasthin::cmd_audit(run_dir);
}
