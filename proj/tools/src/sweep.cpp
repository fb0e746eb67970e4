#include "maisteer/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "maisteer/criteria.hpp"
#include "maisteer/entanglement.hpp"
#include "maisteer/gaussian_cv.hpp"
#include "maisteer/open_systems.hpp"
#include "maisteer/spin.hpp"
#include "maisteer/spin_wigner.hpp"
#include "maisteer/split_state.hpp"

namespace maisteer::sweep {

namespace {

constexpr const char *kNames[] = {"steering-sweep", "entanglement-sweep", "cv-noise", "loss-sweep",
                                  "wigner-snapshot"};

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string &text, const std::string &field, bool allow_inf) {
    const std::string t = trim(text);
    if (t.empty()) {
        throw ConfigError(field, "empty value");
    }
    char *end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) {
        throw ConfigError(field, "'" + t + "' is not a number");
    }
    if (std::isnan(v) || (std::isinf(v) && !(allow_inf && v > 0))) {
        throw ConfigError(field, "'" + t + "' is not finite");
    }
    return v;
}

void require_grid(const std::vector<double> &grid, const std::string &field, double lo, bool allow_inf) {
    if (grid.empty()) {
        throw ConfigError(field, "grid is empty");
    }
    for (double v : grid) {
        if (std::isnan(v) || (std::isinf(v) && !allow_inf) || v < lo) {
            throw ConfigError(field, "value " + format_value(v) + " out of range");
        }
    }
}

OptimizerSettings optimizer(const SweepConfig &cfg) {
    OptimizerSettings s;
    s.theta_grid = cfg.theta_grid;
    s.mu2_grid = cfg.mu2_grid;
    s.refine_starts = cfg.refine_starts;
    s.tolerance = cfg.tolerance;
    return s;
}

Table steering(const SweepConfig &cfg) {
    Table t{header_for(cfg.experiment), std::vector<std::vector<double>>(cfg.mu.size())};
    const OptimizerSettings s = optimizer(cfg);
    parallel_for(cfg.mu.size(), cfg.threads, [&](std::size_t i) {
        const double mu = cfg.mu[i];
        const SteeringSummary h = steering_hierarchy(build_split_state(cfg.atoms, mu), s);
        t.rows[i] = {mu, h.linear.delta, h.mai.delta, h.fisher.delta, h.mai.theta_x, h.mai.theta_y, h.mai.mu2};
    });
    return t;
}

Table entanglement(const SweepConfig &cfg) {
    Table t{header_for(cfg.experiment), std::vector<std::vector<double>>(cfg.mu.size())};
    EntanglementSettings s;
    s.mu2_grid = cfg.mu2_grid;
    s.refine_starts = cfg.refine_starts;
    s.tolerance = cfg.tolerance;
    parallel_for(cfg.mu.size(), cfg.threads, [&](std::size_t i) {
        const double mu = cfg.mu[i];
        const SplitSpinState state = build_split_state(cfg.atoms, mu);
        const EntanglementResult lin = delta_G(state, GiovannettiMode::linear, s);
        const EntanglementResult mai = delta_G(state, GiovannettiMode::mai, s);
        t.rows[i] = {mu, lin.delta, mai.delta, mai.config.g_x, mai.config.g_y, mai.config.mu2};
    });
    return t;
}

Table cv_noise(const SweepConfig &cfg) {
    Table t{header_for(cfg.experiment), {}};
    for (double r : cfg.r) {
        for (double r2 : cfg.r2) {
            for (double sigma : cfg.sigma) {
                const cv::TmsConfig c{r, r2, sigma};
                t.rows.push_back({sigma, r, r2, cv::analytic_delta(c, cv::Variant::linear),
                                  cv::analytic_delta(c, cv::Variant::mai)});
            }
        }
    }
    return t;
}

Table loss(const SweepConfig &cfg) {
    const std::size_t nm = cfg.mu.size(), ng = cfg.gamma.size();
    std::vector<SplitSpinState> states;
    for (double mu : cfg.mu) {
        states.push_back(build_split_state(cfg.atoms, mu));
    }
    std::vector<CriterionResult> mai(nm), lin(nm);
    const OptimizerSettings s = optimizer(cfg);
    parallel_for(nm, cfg.threads, [&](std::size_t i) {
        lin[i] = delta_R(states[i], ReidMode::linear, s);
        mai[i] = delta_R(states[i], ReidMode::mai, s);
    });

    Table t{header_for(cfg.experiment), std::vector<std::vector<double>>(nm * ng)};
    parallel_for(nm * ng, cfg.threads, [&](std::size_t cell) {
        const std::size_t i = cell / ng, g = cell % ng;
        LossOptimizerSettings ls;
        ls.theta_grid = cfg.theta_grid;
        ls.t2_grid = cfg.t2_grid;
        ls.refine_starts = std::max(1, cfg.refine_starts - 1);
        ls.tolerance = cfg.tolerance;
        ls.seed = &mai[i];
        const CriterionResult r = delta_R_mai_lossy(states[i], cfg.gamma[g], ls);
        t.rows[cell] = {cfg.gamma[g], cfg.mu[i], r.delta, lin[i].delta};
    });
    return t;
}

Table wigner_snapshot(const SweepConfig &cfg) {
    const SplitSpinState state = build_split_state(cfg.atoms, cfg.mu.front());
    const CriterionResult mai = delta_R(state, ReidMode::mai, optimizer(cfg));
    const Assemblage ay = condition_on_alice(state, mai.theta_y);
    const Branch *chosen = nullptr;
    for (const Branch &b : ay.branches) {
        if (b.n_alice == cfg.alice_atoms && std::abs(b.alice_value - cfg.alice_value) < 1e-9) {
            chosen = &b;
        }
    }
    if (chosen == nullptr) {
        throw ConfigError("alice_value", "no branch with N_A = " + std::to_string(cfg.alice_atoms) +
                                             " and l_A = " + format_value(cfg.alice_value));
    }
    const spin::SpinSector sector = chosen->bob;
    CVector phi = spin::unitary_from_generator(spin::spin_along(mai.n_opt, sector), cfg.phase) * chosen->state;
    if (cfg.stage == "mai") {
        phi = spin::oat_unitary(mai.mu2, sector) * phi;
    }
    const wigner::SphereGrid grid = wigner::spherical_wigner(phi, cfg.n_theta, cfg.n_phi);
    Table t{header_for(cfg.experiment), {}};
    for (int i = 0; i < grid.n_theta; ++i) {
        for (int j = 0; j < grid.n_phi; ++j) {
            t.rows.push_back({grid.theta(i), grid.phi(j), grid.values(i, j)});
        }
    }
    return t;
}

std::string temp_name(const std::filesystem::path &target) {
    static std::atomic<unsigned> counter{0};
    std::ostringstream s;
    s << target.filename().string() << ".tmp." << std::this_thread::get_id() << "." << counter++;
    return (target.parent_path() / s.str()).string();
}

void atomic_write(const std::string &path, const std::string &content) {
    const std::filesystem::path target(path);
    const std::string tmp = temp_name(target);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw IoError("write to " + tmp + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move output into " + path + ": " + ec.message());
    }
}

} // namespace

std::string experiment_name(Experiment e) { return kNames[static_cast<int>(e)]; }

Experiment parse_experiment(const std::string &name) {
    for (int i = 0; i < 5; ++i) {
        if (name == kNames[i]) {
            return static_cast<Experiment>(i);
        }
    }
    throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

std::vector<double> parse_grid(const std::string &text, const std::string &field, bool allow_inf) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_number(item, field, allow_inf));
            continue;
        }
        const auto c2 = item.find(':', c1 + 1);
        if (c2 == std::string::npos) {
            throw ConfigError(field, "range '" + item + "' must be start:stop:step");
        }
        const double start = parse_number(item.substr(0, c1), field, false);
        const double stop = parse_number(item.substr(c1 + 1, c2 - c1 - 1), field, false);
        const double step = parse_number(item.substr(c2 + 1), field, false);
        if (!(step > 0.0) || stop < start) {
            throw ConfigError(field, "range '" + item + "' needs step > 0 and stop >= start");
        }
        const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 1000000) {
            throw ConfigError(field, "range '" + item + "' is too long");
        }
        for (long i = 0; i < count; ++i) {
            out.push_back(start + step * static_cast<double>(i));
        }
    }
    if (out.empty()) {
        throw ConfigError(field, "grid is empty");
    }
    return out;
}

void validate(const SweepConfig &cfg) {
    if (cfg.atoms < 1 || cfg.atoms > kMaxAtoms) {
        throw ConfigError("N", "must lie in [1, " + std::to_string(kMaxAtoms) + "]");
    }
    if (cfg.theta_grid < 1) {
        throw ConfigError("theta_grid", "must be >= 1");
    }
    if (cfg.mu2_grid < 1) {
        throw ConfigError("mu2_grid", "must be >= 1");
    }
    if (cfg.t2_grid < 1) {
        throw ConfigError("t2_grid", "must be >= 1");
    }
    if (cfg.refine_starts < 0) {
        throw ConfigError("refine_starts", "must be >= 0");
    }
    if (!(cfg.tolerance > 0.0) || !std::isfinite(cfg.tolerance)) {
        throw ConfigError("tolerance", "must be positive");
    }
    if (cfg.threads < 0) {
        throw ConfigError("threads", "must be >= 0");
    }
    if (cfg.out.empty()) {
        throw ConfigError("out", "output path is empty");
    }
    switch (cfg.experiment) {
    case Experiment::steering:
    case Experiment::entanglement:
        require_grid(cfg.mu, "mu", 0.0, false);
        break;
    case Experiment::loss:
        require_grid(cfg.mu, "mu", 0.0, false);
        require_grid(cfg.gamma, "gamma", 0.0, false);
        break;
    case Experiment::cv_noise:
        require_grid(cfg.sigma, "sigma", 0.0, false);
        require_grid(cfg.r, "r", 0.0, false);
        require_grid(cfg.r2, "r2", 0.0, true);
        break;
    case Experiment::wigner:
        require_grid(cfg.mu, "mu", 0.0, false);
        if (cfg.mu.size() != 1) {
            throw ConfigError("mu", "wigner-snapshot takes a single value");
        }
        if (cfg.n_theta < 2) {
            throw ConfigError("n_theta", "must be >= 2");
        }
        if (cfg.n_phi < 1) {
            throw ConfigError("n_phi", "must be >= 1");
        }
        if (cfg.alice_atoms < 0 || cfg.alice_atoms > cfg.atoms) {
            throw ConfigError("alice_atoms", "must lie in [0, N]");
        }
        if (cfg.stage != "encoded" && cfg.stage != "mai") {
            throw ConfigError("stage", "must be 'encoded' or 'mai'");
        }
        if (!std::isfinite(cfg.phase) || !std::isfinite(cfg.alice_value)) {
            throw ConfigError(std::isfinite(cfg.phase) ? "alice_value" : "phase", "must be finite");
        }
        break;
    }
}

std::vector<std::string> header_for(Experiment e) {
    switch (e) {
    case Experiment::steering:
        return {"mu", "delta_R_L", "delta_R_MAI", "delta_F", "theta_X", "theta_Y", "mu2"};
    case Experiment::entanglement:
        return {"mu", "delta_G_L", "delta_G_MAI", "gX", "gY", "mu2"};
    case Experiment::cv_noise:
        return {"sigma", "r", "r2", "delta_R_L", "delta_R_MAI"};
    case Experiment::loss:
        return {"gamma", "mu", "delta_R_MAI", "delta_R_L"};
    case Experiment::wigner:
        return {"theta", "phi", "W"};
    }
    return {};
}

Table run_sweep(const SweepConfig &cfg) {
    validate(cfg);
    switch (cfg.experiment) {
    case Experiment::steering: return steering(cfg);
    case Experiment::entanglement: return entanglement(cfg);
    case Experiment::cv_noise: return cv_noise(cfg);
    case Experiment::loss: return loss(cfg);
    case Experiment::wigner: return wigner_snapshot(cfg);
    }
    return {};
}

std::string format_value(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

std::string to_csv(const Table &table) {
    std::string out;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        out += (c ? "," : "") + table.header[c];
    }
    out += '\n';
    for (const auto &row : table.rows) {
        if (row.size() != table.header.size()) {
            throw std::logic_error("to_csv: row width does not match the header");
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += (c ? "," : "") + format_value(row[c]);
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(const std::string &text) {
    Table t;
    std::stringstream lines(text);
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::stringstream cells(line);
        std::string cell;
        if (first) {
            while (std::getline(cells, cell, ',')) {
                t.header.push_back(cell);
            }
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(cells, cell, ',')) {
            char *end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) {
                throw std::runtime_error("parse_csv: bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != t.header.size()) {
            throw std::runtime_error("parse_csv: row width does not match the header");
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv(const Table &table, const std::string &path) {
    if (table.rows.empty()) {
        throw IoError("refusing to write an empty table to " + path);
    }
    atomic_write(path, to_csv(table));
}

Table read_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

void write_svg(const Table &table, const std::string &path) {
    if (table.rows.empty() || table.header.size() < 2) {
        throw IoError("refusing to plot an empty table to " + path);
    }
    constexpr double W = 720, H = 440, L = 60, R = 160, T = 20, B = 40;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const auto finite_range = [&](std::size_t c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto &row : table.rows) {
            if (std::isfinite(row[c])) {
                lo = std::min(lo, row[c]);
                hi = std::max(hi, row[c]);
            }
        }
        if (!(lo <= hi)) {
            lo = 0.0, hi = 1.0;
        }
        if (hi == lo) {
            hi = lo + 1.0;
        }
        return std::pair{lo, hi};
    };

    if (table.header == std::vector<std::string>{"theta", "phi", "W"}) {
        const auto [tlo, thi] = finite_range(0);
        const auto [plo, phi] = finite_range(1);
        const auto [wlo, whi] = finite_range(2);
        std::size_t nt = 0;
        for (const auto &row : table.rows) {
            nt += row[1] == table.rows.front()[1] ? 1 : 0;
        }
        const std::size_t np = table.rows.size() / std::max<std::size_t>(1, nt);
        const double cw = (W - L - R) / std::max<std::size_t>(1, np), ch = (H - T - B) / std::max<std::size_t>(1, nt);
        for (const auto &row : table.rows) {
            const double x = L + (row[1] - plo) / (phi - plo) * (W - L - R - cw);
            const double y = T + (row[0] - tlo) / (thi - tlo) * (H - T - B - ch);
            const double u = (row[2] - wlo) / (whi - wlo);
            const int red = static_cast<int>(255 * u), blue = 255 - red;
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw + 0.5 << "\" height=\""
                << ch + 0.5 << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n";
        }
        svg << "<text x=\"" << L << "\" y=\"" << H - 10 << "\">phi</text>\n";
        svg << "<text x=\"10\" y=\"" << T + 10 << "\">theta</text>\n";
    } else {
        const auto [xlo, xhi] = finite_range(0);
        double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            const auto [lo, hi] = finite_range(c);
            ylo = std::min(ylo, lo);
            yhi = std::max(yhi, hi);
        }
        const auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
        const auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };
        svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
            << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
        static const char *colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            svg << "<polyline fill=\"none\" stroke=\"" << colors[(c - 1) % 6] << "\" points=\"";
            for (const auto &row : table.rows) {
                if (std::isfinite(row[0]) && std::isfinite(row[c])) {
                    svg << px(row[0]) << "," << py(row[c]) << " ";
                }
            }
            svg << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * c << "\" fill=\""
                << colors[(c - 1) % 6] << "\">" << table.header[c] << "</text>\n";
        }
        svg << "<text x=\"" << L << "\" y=\"" << H - 10 << "\">" << table.header[0] << " ["
            << format_value(xlo) << ", " << format_value(xhi) << "]</text>\n";
        svg << "<text x=\"4\" y=\"" << T + 10 << "\">" << format_value(yhi) << "</text>\n";
        svg << "<text x=\"4\" y=\"" << H - B << "\">" << format_value(ylo) << "</text>\n";
    }
    svg << "</svg>\n";
    atomic_write(path, svg.str());
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)> &body) {
    unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_guard;
    const auto work = [&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_guard);
                if (!error) {
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace maisteer::sweep
