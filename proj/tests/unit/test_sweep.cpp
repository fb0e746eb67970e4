#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "maisteer/sweep.hpp"

using namespace maisteer::sweep;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / ("maisteer_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const fs::path &p) {
    std::ifstream in(p);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
    }
    return n;
}

SweepConfig small_steering() {
    SweepConfig cfg;
    cfg.out = "unused.csv";
    cfg.experiment = Experiment::steering;
    cfg.atoms = 4;
    cfg.mu = parse_grid("0:1:0.05", "mu");
    cfg.theta_grid = 12;
    cfg.mu2_grid = 16;
    cfg.refine_starts = 1;
    cfg.threads = 2;
    return cfg;
}

} // namespace

TEST(Sweep, ParseGrid) {
    EXPECT_EQ(parse_grid("0.1,0.2,0.5", "mu"), (std::vector<double>{0.1, 0.2, 0.5}));
    const auto range = parse_grid("0:1:0.05", "mu");
    ASSERT_EQ(range.size(), 21u);
    EXPECT_NEAR(range.back(), 1.0, 1e-12);
    EXPECT_NEAR(range[7], 0.35, 1e-12);
    const auto with_inf = parse_grid("0,0.5,1,inf", "r2", true);
    EXPECT_TRUE(std::isinf(with_inf.back()));
    EXPECT_THROW(parse_grid("0,inf", "r2"), ConfigError);
    EXPECT_THROW(parse_grid("", "mu"), ConfigError);
    EXPECT_THROW(parse_grid("1:0:0.1", "mu"), ConfigError);
    EXPECT_THROW(parse_grid("0:1:0", "mu"), ConfigError);
    EXPECT_THROW(parse_grid("a,b", "mu"), ConfigError);
    try {
        parse_grid("x", "sigma");
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.field(), "sigma");
    }
}

TEST(Sweep, Headers) {
    auto joined = [](Experiment e) {
        std::string s;
        for (const auto &h : header_for(e)) {
            s += (s.empty() ? "" : ",") + h;
        }
        return s;
    };
    EXPECT_EQ(joined(Experiment::steering), "mu,delta_R_L,delta_R_MAI,delta_F,theta_X,theta_Y,mu2");
    EXPECT_EQ(joined(Experiment::entanglement), "mu,delta_G_L,delta_G_MAI,gX,gY,mu2");
    EXPECT_EQ(joined(Experiment::cv_noise), "sigma,r,r2,delta_R_L,delta_R_MAI");
    EXPECT_EQ(joined(Experiment::loss), "gamma,mu,delta_R_MAI,delta_R_L");
    EXPECT_EQ(joined(Experiment::wigner), "theta,phi,W");
}

TEST(Sweep, ExperimentNames) {
    for (Experiment e : {Experiment::steering, Experiment::entanglement, Experiment::cv_noise, Experiment::loss,
                         Experiment::wigner}) {
        EXPECT_EQ(parse_experiment(experiment_name(e)), e);
    }
    EXPECT_EQ(experiment_name(Experiment::cv_noise), "cv-noise");
    EXPECT_THROW(parse_experiment("nope"), ConfigError);
}

TEST(Sweep, ValidateNamesField) {
    SweepConfig cfg;
    cfg.atoms = 41;
    try {
        validate(cfg);
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.field(), "N");
    }
    cfg = SweepConfig{};
    EXPECT_THROW(validate(cfg), ConfigError);
    cfg.out = "unused.csv";
    cfg.experiment = Experiment::cv_noise;
    cfg.sigma = {-0.1};
    try {
        validate(cfg);
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.field(), "sigma");
    }
    cfg = SweepConfig{};
    cfg.out = "unused.csv";
    cfg.mu.clear();
    EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Sweep, CsvFormatAndRoundTrip) {
    Table t{{"a", "b"}, {}};
    for (int i = 0; i < 21; ++i) {
        t.rows.push_back({i * 0.05, std::exp(-i * 1.37) * 1234.5678901234567});
    }
    t.rows.push_back({std::numeric_limits<double>::infinity(), -1e-300});
    const std::string csv = to_csv(t);
    EXPECT_EQ(csv.substr(0, 4), "a,b\n");
    EXPECT_EQ(format_value(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_value(-std::numeric_limits<double>::infinity()), "-inf");
    const Table back = parse_csv(csv);
    ASSERT_EQ(back.header, t.header);
    ASSERT_EQ(back.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            const double a = t.rows[i][k], b = back.rows[i][k];
            if (std::isinf(a)) {
                EXPECT_EQ(a, b);
            } else {
                EXPECT_LE(std::abs(a - b), 5e-12 * std::abs(a));
            }
        }
    }
}

TEST(Sweep, WriteCsvLinesAndAtomicity) {
    const fs::path dir = scratch_dir("csv");
    Table t{{"x", "y"}, {}};
    for (int i = 0; i < 21; ++i) {
        t.rows.push_back({double(i), double(i * i)});
    }
    const fs::path out = dir / "table.csv";
    write_csv(t, out.string());
    EXPECT_EQ(count_lines(out), 22);
    write_csv(t, out.string());
    EXPECT_EQ(count_lines(out), 22);
    int entries = 0;
    for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir)) {
        ++entries;
    }
    EXPECT_EQ(entries, 1);
    const Table back = read_csv(out.string());
    EXPECT_EQ(back.rows.size(), 21u);
}

TEST(Sweep, EmptyTableLeavesNoFile) {
    const fs::path dir = scratch_dir("empty");
    const fs::path out = dir / "empty.csv";
    EXPECT_THROW(write_csv(Table{{"x"}, {}}, out.string()), std::exception);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Sweep, UnwritablePath) {
    Table t{{"x"}, {{1.0}}};
    EXPECT_THROW(write_csv(t, "/nonexistent_dir_for_test/out.csv"), IoError);
}

TEST(Sweep, CvNoiseRowCount) {
    SweepConfig cfg;
    cfg.out = "unused.csv";
    cfg.experiment = Experiment::cv_noise;
    cfg.r = {0.5};
    cfg.sigma = parse_grid("0:0.5:0.05", "sigma");
    cfg.r2 = parse_grid("0,0.5,1,inf", "r2", true);
    const Table t = run_sweep(cfg);
    ASSERT_EQ(t.rows.size(), 44u);
    EXPECT_EQ(t.header, header_for(Experiment::cv_noise));
    for (const auto &row : t.rows) {
        if (row[0] > 0.0 && row[2] > 0.0) {
            EXPECT_GT(row[4], row[3]);
        }
    }
}

TEST(Sweep, SteeringSweepIsDeterministic) {
    SweepConfig cfg = small_steering();
    const Table a = run_sweep(cfg);
    ASSERT_EQ(a.rows.size(), 21u);
    cfg.threads = 1;
    const Table b = run_sweep(cfg);
    EXPECT_EQ(to_csv(a), to_csv(b));
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_NEAR(a.rows[i][0], 0.05 * double(i), 1e-12);
        EXPECT_LE(a.rows[i][1], a.rows[i][2] + 1e-8);
        EXPECT_LE(a.rows[i][2], a.rows[i][3] + 1e-8);
    }
}

TEST(Sweep, WignerSnapshotShape) {
    SweepConfig cfg;
    cfg.out = "unused.csv";
    cfg.experiment = Experiment::wigner;
    cfg.atoms = 6;
    cfg.mu = {0.5};
    cfg.alice_atoms = 3;
    cfg.alice_value = 0.5;
    cfg.n_theta = 8;
    cfg.n_phi = 16;
    cfg.theta_grid = 12;
    cfg.mu2_grid = 16;
    cfg.refine_starts = 1;
    const Table t = run_sweep(cfg);
    EXPECT_EQ(t.rows.size(), 128u);
    EXPECT_EQ(t.header, header_for(Experiment::wigner));
}

TEST(Sweep, ParallelForCoversEveryIndex) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) {
        EXPECT_EQ(h, 1);
    }
    std::atomic<int> ran{0};
    EXPECT_THROW(parallel_for(100, 3,
                              [&](std::size_t i) {
                                  ++ran;
                                  if (i == 17) {
                                      throw std::runtime_error("boom");
                                  }
                              }),
                 std::runtime_error);
    EXPECT_GE(ran.load(), 1);
}

TEST(Sweep, SvgEmission) {
    const fs::path dir = scratch_dir("svg");
    Table t{{"mu", "a", "b"}, {{0.0, 1.0, 2.0}, {0.5, 1.5, 1.0}, {1.0, 0.5, 3.0}}};
    write_svg(t, (dir / "plot.svg").string());
    std::ifstream in(dir / "plot.svg");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NE(ss.str().find("<svg"), std::string::npos);
    EXPECT_NE(ss.str().find("polyline"), std::string::npos);
}
