#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maisteer::sweep {

enum class Experiment { steering, entanglement, cv_noise, loss, wigner };

/// Subcommand name, e.g. "steering-sweep".
std::string experiment_name(Experiment e);
Experiment parse_experiment(const std::string &name);

/// Invalid configuration value; field() names the offending key.
class ConfigError : public std::invalid_argument {
  public:
    ConfigError(std::string field, const std::string &what)
        : std::invalid_argument("invalid " + field + ": " + what), field_{std::move(field)} {}
    [[nodiscard]] const std::string &field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// Output file could not be written.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SweepConfig {
    Experiment experiment = Experiment::steering;
    int atoms = 20;
    std::vector<double> mu{0.4};
    std::vector<double> gamma{0.0, 0.1, 0.2, 0.4};
    std::vector<double> sigma{0.0};
    std::vector<double> r{0.5};
    std::vector<double> r2{0.0};

    // optimizer
    int theta_grid = 48;
    int mu2_grid = 64;
    int refine_starts = 3;
    double tolerance = 1e-7;
    int t2_grid = 32;

    // wigner-snapshot
    int n_theta = 64;
    int n_phi = 128;
    int alice_atoms = 10;
    double alice_value = 5.0;
    std::string stage = "mai"; // encoded | mai
    double phase = 0.0;

    std::string out;
    bool emit_svg = false;
    std::uint64_t seed = 0;
    int threads = 0; // 0 = hardware concurrency
};

/// Throws ConfigError naming the first invalid field.
void validate(const SweepConfig &cfg);

/// Parses "a,b,c" or "start:stop:step" (inclusive). "inf" is accepted when
/// allow_inf is set.
std::vector<double> parse_grid(const std::string &text, const std::string &field,
                               bool allow_inf = false);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Exact CSV header for an experiment.
std::vector<std::string> header_for(Experiment e);

/// One row per grid point, ordered by grid index.
Table run_sweep(const SweepConfig &cfg);

/// 12 significant digits, "inf"/"-inf"/"nan" for non-finite values.
std::string format_value(double v);

std::string to_csv(const Table &table);
Table parse_csv(const std::string &text);

/// Writes through a temporary file and renames it into place. An empty
/// table is an error and leaves no file behind.
void write_csv(const Table &table, const std::string &path);
Table read_csv(const std::string &path);

/// Line plot of every column against the first (heat map for theta,phi,W).
void write_svg(const Table &table, const std::string &path);

/// Runs body(i) for i in [0, count) on `threads` workers. The first
/// exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)> &body);

} // namespace maisteer::sweep
