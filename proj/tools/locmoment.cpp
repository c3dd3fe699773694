#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "locmoment/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw locmoment::harness::ConfigError("bad value '" + item + "'");
        }
    }
    return out;
}

struct Options {
    std::string kind;
    std::string config_path;
    std::string out_dir;
    std::string axis;
    std::string values;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

int run_main(const Options& opt, bool is_sweep) {
    using namespace locmoment::harness;
    auto cfg = config_from_file(opt.config_path);
    if (!is_sweep && cfg.kind != opt.kind)
        throw ConfigError("config kind '" + cfg.kind + "' does not match '" +
                          opt.kind + "'");
    if (opt.seed_set) {
        cfg.seed = opt.seed;
        cfg.raw["seed"] = opt.seed;
    }
    if (opt.workers > 0) {
        cfg.workers = opt.workers;
        cfg.raw["workers"] = opt.workers;
    }
    if (!opt.out_dir.empty()) cfg.out = opt.out_dir;

    const auto tables =
        is_sweep ? sweep(cfg, opt.axis, parse_values(opt.values)) : run(cfg);
    const auto paths = write_results(tables, cfg.out);
    for (const auto& p : paths) std::cout << p << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-volume fractional-moment laboratory for random "
                 "Schrodinger operators"};
    app.require_subcommand(1);

    Options opt;
    std::vector<CLI::App*> kind_cmds;
    for (const auto& kind : locmoment::harness::experiment_kinds()) {
        auto* cmd = app.add_subcommand(kind, "run a '" + kind + "' experiment");
        cmd->add_option("--config", opt.config_path, "experiment config (JSON)")
            ->required();
        cmd->add_option("--seed", opt.seed, "override the master seed")
            ->each([&](const std::string&) { opt.seed_set = true; });
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--workers", opt.workers, "worker thread count");
        kind_cmds.push_back(cmd);
    }
    auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per axis value");
    sweep_cmd->add_option("--config", opt.config_path, "experiment config (JSON)")
        ->required();
    sweep_cmd->add_option("--axis", opt.axis, "numeric config leaf, e.g. model.lambda")
        ->required();
    sweep_cmd->add_option("--values", opt.values, "comma-separated axis values")
        ->required();
    sweep_cmd->add_option("--seed", opt.seed, "override the master seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    sweep_cmd->add_option("--out", opt.out_dir, "output directory");
    sweep_cmd->add_option("--workers", opt.workers, "worker thread count");

    auto* verify_cmd = app.add_subcommand("verify", "re-hash result files");
    verify_cmd->add_option("--out", opt.out_dir, "directory of result files")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (verify_cmd->parsed()) {
            std::string diag;
            if (locmoment::harness::verify_dir(opt.out_dir, &diag)) {
                std::cout << "ok\n";
                return kExitOk;
            }
            std::cerr << "verification failed: " << diag << "\n";
            return kExitConfig;
        }
        if (sweep_cmd->parsed()) return run_main(opt, /*is_sweep=*/true);
        for (std::size_t i = 0; i < kind_cmds.size(); ++i)
            if (kind_cmds[i]->parsed()) {
                opt.kind = locmoment::harness::experiment_kinds()[i];
                return run_main(opt, /*is_sweep=*/false);
            }
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const locmoment::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
