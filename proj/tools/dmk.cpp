// Command-line driver: run scenarios, sweep beta, and run the self-checks.

#include "dmk/config.hpp"
#include "dmk/scenario.hpp"
#include "dmk/selfcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

dmk::ScenarioConfig load_with_overrides(const std::string& path, const std::string& out,
                                        const std::optional<std::uint64_t>& seed) {
    auto cfg = dmk::load_config(path);
    if (!out.empty()) cfg.output = out;
    if (seed) {
        if (cfg.scenario != dmk::Scenario::tc2) throw dmk::ConfigError("--seed only applies to tc2 scenarios");
        cfg.forcing.seed = *seed;
    }
    return cfg;
}

int cmd_run(const std::string& path, const std::string& out, const std::optional<std::uint64_t>& seed) {
    const auto cfg = load_with_overrides(path, out, seed);
    const auto res = dmk::run_scenario(cfg, {true, &std::cerr});
    dmk::write_summary(std::cout, res);
    for (const auto& l : res.levels) {
        if (!l.ok) return 2;
    }
    return 0;
}

std::vector<double> parse_betas(const std::string& text) {
    std::vector<double> v;
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t pos = 0;
            const double b = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            if (!(b > 0.0)) throw dmk::ConfigError("--betas: beta must be > 0, got " + tok);
            v.push_back(b);
        } catch (const std::invalid_argument&) {
            throw dmk::ConfigError("--betas: not a number: '" + tok + "'");
        }
    }
    if (v.empty()) throw dmk::ConfigError("--betas: empty list");
    return v;
}

int cmd_sweep(const std::string& path, const std::string& betas_text, const std::string& out,
              const std::optional<std::uint64_t>& seed) {
    const auto base = load_with_overrides(path, out, seed);
    const auto betas = parse_betas(betas_text);
    std::filesystem::create_directories(base.output);

    std::ostringstream table;
    table << std::left << std::setw(8) << "beta" << std::setw(7) << "level" << std::setw(6) << "ok" << std::setw(6)
          << "conv" << std::setw(20) << "lyapunov" << std::setw(14) << "err" << std::setw(14) << "support"
          << std::setw(10) << "branch_y" << '\n';
    bool all_ok = true;
    for (double beta : betas) {
        auto cfg = base;
        cfg.sim.beta = beta;
        char tag[32];
        std::snprintf(tag, sizeof tag, "beta_%g", beta);
        cfg.output = (std::filesystem::path(base.output) / tag).string();
        const auto res = dmk::run_scenario(cfg, {true, &std::cerr});
        for (const auto& l : res.levels) {
            all_ok = all_ok && l.ok;
            table << std::left << std::setw(8) << beta << std::setw(7) << l.level << std::setw(6)
                  << (l.ok ? "yes" : "no") << std::setw(6) << (l.converged ? "yes" : "no") << std::setw(20)
                  << dmk::format_double(l.lyapunov) << std::setw(14) << dmk::detail::num(l.err) << std::setw(14)
                  << dmk::detail::num(l.support_fraction) << std::setw(10)
                  << (l.branch_point ? dmk::detail::num(l.branch_point->y) : std::string("none")) << '\n';
        }
    }
    dmk::write_text(std::filesystem::path(base.output) / "sweep_summary.txt",
                    table.str() + "\n# base configuration\n" + dmk::format_config(base));
    std::cout << table.str();
    return all_ok ? 0 : 2;
}

int cmd_check() {
    const auto results = dmk::run_self_checks();
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.ok ? "PASS " : "FAIL ") << r.name << "  (" << r.detail << ")\n";
        failed += r.ok ? 0 : 1;
    }
    std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
    return failed ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended dynamic Monge-Kantorovich simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string out;
    std::optional<std::uint64_t> seed;
    app.add_option("--out", out, "Output directory (overrides scenario.output)");
    app.add_option("--seed", seed, "Random seed for tc2 source points");

    std::string config;
    auto* run = app.add_subcommand("run", "Run a scenario at every refinement level");
    run->add_option("config", config, "Scenario config file")->required()->check(CLI::ExistingFile);

    std::string betas;
    auto* sweep = app.add_subcommand("sweep-beta", "Run a scenario for several values of beta");
    sweep->add_option("config", config, "Scenario config file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--betas", betas, "Comma-separated list, e.g. 1.1,1.5,2,3")->required();

    app.add_subcommand("check", "Run the invariant self-test battery");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, out, seed);
        if (*sweep) return cmd_sweep(config, betas, out, seed);
        return cmd_check();
    } catch (const dmk::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
