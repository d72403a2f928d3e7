#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "polytv/app.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Off-grid total variation recovery with polygonal atoms"};
    cli.require_subcommand(1);

    polytv::app::CommandOptions opt;
    std::uint64_t seed = 0;

    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = cli.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "configuration file")->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "noise seed (overrides noise.seed)");
        sub->add_flag("--quiet", opt.quiet, "no progress output");
        return sub;
    };
    CLI::App* solve = add("solve", "sliding Frank-Wolfe reconstruction of a phantom");
    CLI::App* cheeger = add("cheeger", "Cheeger oracle on a single dual field");
    CLI::App* baseline = add("baseline", "fixed-grid TV reconstruction of a phantom");
    CLI::App* radial = add("radial", "radial profile table and optional one-sensor run");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : polytv::app::config_error;
    }
    for (CLI::App* sub : {solve, cheeger, baseline, radial})
        if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;

    if (solve->parsed()) return polytv::app::cmd_solve(opt, std::cout, std::cerr);
    if (cheeger->parsed()) return polytv::app::cmd_cheeger(opt, std::cout, std::cerr);
    if (baseline->parsed()) return polytv::app::cmd_baseline(opt, std::cout, std::cerr);
    return polytv::app::cmd_radial(opt, std::cout, std::cerr);
}
