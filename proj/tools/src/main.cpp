#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maisteer/sweep.hpp"
#include "maisteer/types.hpp"

namespace {

using maisteer::sweep::ConfigError;
using maisteer::sweep::Experiment;
using maisteer::sweep::SweepConfig;

// Raw grid text; values may arrive split on whitespace or commas.
struct GridText {
    std::vector<std::string> parts;
    bool given() const { return !parts.empty(); }
    std::string joined() const {
        std::string s;
        for (const auto &p : parts) {
            s += (s.empty() ? "" : ",") + p;
        }
        return s;
    }
};

struct Command {
    Experiment experiment;
    CLI::App *app = nullptr;
    SweepConfig cfg;
    GridText mu, gamma, sigma, r, r2;
};

void add_grid(CLI::App *app, const std::string &name, GridText &target, const std::string &help) {
    app->add_option("--" + name, target.parts, help)->delimiter(',')->expected(1, 1 << 20);
}

void add_options(Command &c) {
    CLI::App *a = c.app;
    SweepConfig &cfg = c.cfg;
    a->add_option("--out", cfg.out, "output CSV path")->capture_default_str();
    a->add_flag("--svg", cfg.emit_svg, "also write <out>.svg");
    a->add_option("--threads", cfg.threads, "worker threads (0 = all cores)")->capture_default_str();
    a->add_option("--seed", cfg.seed, "seed recorded with the run")->capture_default_str();
    a->add_option("--N", cfg.atoms, "total atom number")->capture_default_str();
    a->add_option("--theta_grid", cfg.theta_grid, "grid points over Alice's angles")->capture_default_str();
    a->add_option("--mu2_grid", cfg.mu2_grid, "grid points over mu2")->capture_default_str();
    a->add_option("--refine_starts", cfg.refine_starts, "Nelder-Mead starts")->capture_default_str();
    a->add_option("--tolerance", cfg.tolerance, "simplex diameter tolerance")->capture_default_str();

    switch (c.experiment) {
    case Experiment::steering:
    case Experiment::entanglement:
        add_grid(a, "mu", c.mu, "twisting strengths, list or start:stop:step");
        break;
    case Experiment::loss:
        add_grid(a, "mu", c.mu, "twisting strengths");
        add_grid(a, "gamma", c.gamma, "loss rates");
        a->add_option("--t2_grid", cfg.t2_grid, "snapshots over the twisting time")->capture_default_str();
        break;
    case Experiment::cv_noise:
        add_grid(a, "sigma", c.sigma, "detection noise deviations");
        add_grid(a, "r", c.r, "two-mode squeezing");
        add_grid(a, "r2", c.r2, "readout squeezing; inf allowed");
        break;
    case Experiment::wigner:
        add_grid(a, "mu", c.mu, "twisting strength (one value)");
        a->add_option("--n_theta", cfg.n_theta, "polar grid points")->capture_default_str();
        a->add_option("--n_phi", cfg.n_phi, "azimuthal grid points")->capture_default_str();
        a->add_option("--alice_atoms", cfg.alice_atoms, "N_A of the branch")->capture_default_str();
        a->add_option("--alice_value", cfg.alice_value, "l_A of the branch")->capture_default_str();
        a->add_option("--stage", cfg.stage, "encoded or mai")->capture_default_str();
        a->add_option("--phase", cfg.phase, "encoded phase")->capture_default_str();
        break;
    }
}

void finalize(Command &c) {
    using maisteer::sweep::parse_grid;
    if (c.mu.given()) c.cfg.mu = parse_grid(c.mu.joined(), "mu");
    if (c.gamma.given()) c.cfg.gamma = parse_grid(c.gamma.joined(), "gamma");
    if (c.sigma.given()) c.cfg.sigma = parse_grid(c.sigma.joined(), "sigma");
    if (c.r.given()) c.cfg.r = parse_grid(c.r.joined(), "r");
    if (c.r2.given()) c.cfg.r2 = parse_grid(c.r2.joined(), "r2", true);
    if (c.cfg.out.empty()) {
        c.cfg.out = maisteer::sweep::experiment_name(c.experiment) + ".csv";
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Steering and entanglement witness sweeps for split spin squeezed and two-mode squeezed states"};
    app.set_config("--config", "", "INI file with one [subcommand] section per experiment");
    app.require_subcommand(1);
    app.fallthrough();

    std::vector<Command> commands;
    commands.reserve(5);
    const std::pair<Experiment, const char *> defs[] = {
        {Experiment::steering, "delta_R (linear, MAI) and delta_F over mu"},
        {Experiment::entanglement, "delta_G (linear, MAI) over mu"},
        {Experiment::cv_noise, "two-mode squeezed vacuum with detection noise"},
        {Experiment::loss, "lossy MAI delta_R over gamma and mu"},
        {Experiment::wigner, "spherical Wigner function of one conditional state"}};
    for (const auto &[e, help] : defs) {
        Command c{e, app.add_subcommand(maisteer::sweep::experiment_name(e), help), {}, {}, {}, {}, {}, {}};
        c.cfg.experiment = e;
        if (e == Experiment::steering || e == Experiment::entanglement) {
            c.cfg.mu = maisteer::sweep::parse_grid("0:1:0.05", "mu");
        }
        if (e == Experiment::cv_noise) {
            c.cfg.sigma = maisteer::sweep::parse_grid("0:0.5:0.05", "sigma");
            c.cfg.r2 = maisteer::sweep::parse_grid("0,0.5,1,inf", "r2", true);
        }
        commands.push_back(std::move(c));
    }
    for (auto &c : commands) {
        add_options(c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    for (auto &c : commands) {
        if (!c.app->parsed()) {
            continue;
        }
        try {
            finalize(c);
            const auto table = maisteer::sweep::run_sweep(c.cfg);
            maisteer::sweep::write_csv(table, c.cfg.out);
            if (c.cfg.emit_svg) {
                maisteer::sweep::write_svg(table, c.cfg.out + ".svg");
            }
            std::fprintf(stderr, "%s: %zu rows -> %s (seed %llu)\n", c.app->get_name().c_str(),
                         table.rows.size(), c.cfg.out.c_str(),
                         static_cast<unsigned long long>(c.cfg.seed));
            return 0;
        } catch (const ConfigError &e) {
            std::fprintf(stderr, "maisteer: %s\n", e.what());
            return 1;
        } catch (const std::exception &e) {
            std::fprintf(stderr, "maisteer: %s failed: %s\n", c.app->get_name().c_str(), e.what());
            return 1;
        }
    }
    return 1;
}
