// strobosq: analytic curves, simulations and fits for stroboscopic
// back-action-evading squeezing.
//
//   strobosq <coeffs|spin|spectrum|validate|fit> [--config FILE] [--set key=value]...
//            [--out PATH] [--workers N]

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "strobosq/cli.hpp"
#include "strobosq/config.hpp"
#include "strobosq/errors.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    int workers = -1;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
    sub->add_option("--config", opts.config, "key = value configuration file");
    sub->add_option("--set", opts.sets, "override a key (key=value), repeatable")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_option("--out", opts.out, "output path ('-' for stdout)");
    sub->add_option("--workers", opts.workers, "worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace strobosq;

    CLI::App app{"Stroboscopic back-action-evading squeezing toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"coeffs", "polarizability coefficients and zeta^2 versus detuning", cmd_coeffs},
        {"spin", "spin squeezing along a time, duty or angle axis", cmd_spin},
        {"spectrum", "light squeezing spectrum or sideband duty sweep", cmd_spectrum},
        {"validate", "run the invariant suite", cmd_validate},
        {"fit", "least-squares fit of a model family to a CSV file", cmd_fit},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) {
        subs.push_back(app.add_subcommand(name, help));
        add_common(subs.back(), opts);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code::config_error;
    }

    try {
        std::vector<std::string> overrides = opts.sets;
        if (!opts.out.empty()) {
            overrides.push_back("output=" + opts.out);
        }
        if (opts.workers >= 0) {
            overrides.push_back("workers=" + std::to_string(opts.workers));
        }
        std::optional<std::string> env_seed;
        if (const char* s = std::getenv("STROBO_SEED"); s != nullptr && *s != '\0') {
            env_seed = s;
        }
        std::optional<std::filesystem::path> config_file;
        if (!opts.config.empty()) {
            config_file = opts.config;
        }
        const RunConfig cfg = resolve_run_config(config_file, env_seed, overrides);

        Command command = nullptr;
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i]->parsed()) {
                command = std::get<2>(commands[i]);
            }
        }

        if (cfg.output.empty() || cfg.output == "-") {
            const int code = command(cfg, std::cout, std::cerr);
            std::cout.flush();
            return code;
        }
        std::ofstream file(cfg.output, std::ios::binary);
        if (!file) {
            throw ConfigError("cannot open output file: " + cfg.output);
        }
        const int code = command(cfg, file, std::cerr);
        file.flush();
        if (!file) {
            std::cerr << "error: failed writing " << cfg.output << '\n';
            return exit_code::config_error;
        }
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::config_error;
    }
}
