#include <ksddg/experiments.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <sstream>

using namespace ksddg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("ksddg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::size_t count_lines(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

// ---------------------------------------------------------------- config

TEST(Config, NamedDefaults)
{
    const auto c = parse_config_string("experiment = conv1d\n");
    EXPECT_EQ(c.experiment, Experiment::Conv1d);
    EXPECT_EQ(c.N, (std::vector<int>{8, 16, 32, 64, 128}));
    EXPECT_DOUBLE_EQ(c.params.B(), 0.2);
    EXPECT_DOUBLE_EQ(c.T_final, 0.01);
    EXPECT_DOUBLE_EQ(c.flux().beta0, 7.0 / 6.0);

    const auto k2 = parse_config_string("experiment = conv1d\n[mesh]\ndegree = 2\n");
    EXPECT_EQ(k2.N, (std::vector<int>{4, 8, 16, 32, 64}));
    EXPECT_NEAR(k2.flux().beta0, 4.0, 1e-12);

    const auto b = parse_config_string("experiment = blowup");
    EXPECT_EQ(b.model, MobilityModel::Linear);
    EXPECT_EQ(b.bc, BoundaryKind::ZeroFlux);
    EXPECT_DOUBLE_EQ(b.flux().beta0, 8.0);
    EXPECT_EQ(b.snapshot_times, (std::vector<double>{0.0, 1e-5, 5e-5}));

    const auto e = parse_config_string("experiment = equilibrium");
    EXPECT_EQ(e.N, std::vector<int>{32});
    EXPECT_DOUBLE_EQ(e.params.B(), 0.5);
    EXPECT_DOUBLE_EQ(e.params.alpha, 0.02);
    EXPECT_EQ(default_sweep(Experiment::Conv2d, 1), (std::vector<int>{10, 20, 30, 40}));
}

TEST(Config, SectionsCommentsAndOverrides)
{
    const std::string text = R"(# comment
experiment = custom   # trailing comment
[mesh]
N = 12
degree = 2
domain = 0, 2pi
boundary = zeroflux
[flux]
beta0 = 7/6
beta1 = 1/12
[model]
chi = 0.5
B = 0.4
initial = uniform
uniform_u = 0.25
sources = none
[time]
T_final = 0.02
dt_rule = fixed
dt = 1e-3
[solver]
limiter = off
newton_tol = 1e-9
[output]
dir = somewhere
snapshots = 0.02, 0, 0.01
)";
    const auto c = parse_config_string(text, {"mesh.N=20", "model.alpha = 0.5"});
    EXPECT_EQ(c.N, std::vector<int>{20});
    EXPECT_EQ(c.degree, 2);
    EXPECT_NEAR(c.domain.upper[0], 2.0 * std::numbers::pi, 1e-15);
    EXPECT_EQ(c.bc, BoundaryKind::ZeroFlux);
    EXPECT_NEAR(c.flux().beta0, 7.0 / 6.0, 1e-15);
    EXPECT_NEAR(c.flux().beta1, 1.0 / 12.0, 1e-15);
    EXPECT_DOUBLE_EQ(c.params.chi, 0.5);
    EXPECT_NEAR(c.params.B(), 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(c.params.alpha, 0.5);
    EXPECT_EQ(c.initial, InitialData::Uniform);
    EXPECT_FALSE(c.step.limiter);
    EXPECT_EQ(c.step.dt_rule, DtRule::Fixed);
    EXPECT_EQ(c.output_dir, "somewhere");
    EXPECT_EQ(c.snapshot_times, (std::vector<double>{0.0, 0.01, 0.02}));
}

TEST(Config, ChangingChiKeepsB)
{
    const auto c = parse_config_string("experiment = equilibrium\n[model]\nchi = 0.2\n");
    EXPECT_NEAR(c.params.B(), 0.5, 1e-15);
    const auto d = parse_config_string("experiment = custom\n[model]\nchi = 0.2\nD = 0.3\n");
    EXPECT_NEAR(d.params.D, 0.3, 1e-15);
    EXPECT_THROW(parse_config_string("[model]\nB = 1\nD = 1\n"), ConfigError);
}

TEST(Config, Errors)
{
    const std::vector<std::string> bad = {
        "experiment = nonsense",
        "[mesh]\nunknown = 1",
        "[mesh]\ndegree = two",
        "[mesh\nN = 3",
        "just a line",
        "experiment = blowup\n[model]\nmobility = saturated",
        "experiment = blowup\n[mesh]\nboundary = periodic",
        "experiment = conv1d\n[mesh]\nN = 16, 8",
        "experiment = conv1d\n[mesh]\nN = 16",
        "experiment = conv2d\n[mesh]\ndomain = 0, 1",
        "experiment = equilibrium\n[mesh]\nN = 8, 16",
        "[time]\nT_final = 0",
        "[time]\nT_final = 0.1\n[output]\nsnapshots = 0.2",
        "[flux]\nbeta0 = -1",
        "[solver]\ndamping = 1.5",
        "[model]\ninitial = uniform\nuniform_u = 1.5\nsources = none",
        "[model]\ninitial = uniform",
        "[mesh]\ndomain = 0, 1/0",
    };
    for (const auto& t : bad)
        EXPECT_THROW(parse_config_string(t), ConfigError) << t;
    EXPECT_THROW(parse_config_string("", {"novalue"}), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST(Config, ShippedConfigFilesParse)
{
    for (const char* name : {"conv1d", "conv2d", "equilibrium", "blowup", "steady"}) {
        const auto c = load_config(std::string(KSDDG_CONFIG_DIR) + "/" + name + ".cfg");
        EXPECT_NO_THROW(c.validate()) << name;
    }
    EXPECT_DOUBLE_EQ(load_config(std::string(KSDDG_CONFIG_DIR) + "/blowup.cfg").flux().beta0, 8.0);
    EXPECT_NEAR(load_config(std::string(KSDDG_CONFIG_DIR) + "/conv1d.cfg", {"mesh.degree=2"}).flux().beta0, 4.0, 1e-12);
}

// ---------------------------------------------------------------- convergence tables

TEST(Rates, ReferenceRowsAndSynthetic)
{
    auto r = convergence_rates({{8, 1.97e-2}, {16, 4.91e-3}});
    EXPECT_FALSE(r[0].rate.has_value());
    EXPECT_NEAR(*r[1].rate, 2.00, 0.005);
    r = convergence_rates({{4, 9.72e-3}, {8, 1.25e-3}});
    EXPECT_NEAR(*r[1].rate, 2.96, 0.005);

    std::vector<std::pair<int, double>> cubic, quad;
    for (int N : {4, 8, 16, 32})
        cubic.emplace_back(N, 7.0 * std::pow(N, -3.0));
    for (int N : {10, 20, 30, 40, 50})
        quad.emplace_back(N, 0.3 * std::pow(N, -2.0));
    for (const auto& row : convergence_rates(cubic))
        if (row.rate)
            EXPECT_NEAR(*row.rate, 3.0, 1e-12);
    for (const auto& row : convergence_rates(quad))
        if (row.rate)
            EXPECT_NEAR(*row.rate, 2.0, 1e-12);
}

TEST(Rates, ReferenceP1TableIsReproduced)
{
    const std::vector<int> N{8, 16, 32, 64, 128};
    const std::vector<double> eu{1.97e-2, 4.91e-3, 1.18e-3, 2.59e-4, 6.15e-5};
    const std::vector<double> ec{4.47e-2, 1.06e-2, 2.61e-3, 6.51e-4, 1.62e-4};
    const std::vector<double> ru{2.00, 2.05, 2.19, 2.07};
    const std::vector<double> rc{2.08, 2.02, 2.01, 2.00};
    const auto t = convergence_table(N, eu, ec);
    for (std::size_t i = 1; i < N.size(); ++i) {
        EXPECT_NEAR(*t[i].rate_u, ru[i - 1], 0.01);
        EXPECT_NEAR(*t[i].rate_c, rc[i - 1], 0.01);
    }
}

TEST(Rates, Errors)
{
    EXPECT_THROW((void)convergence_rates({{8, 1e-2}}), std::invalid_argument);
    EXPECT_THROW((void)convergence_rates({{8, 1e-2}, {16, 0.0}}), std::invalid_argument);
    EXPECT_THROW((void)convergence_rates({{8, -1e-2}, {16, 1e-3}}), std::invalid_argument);
    EXPECT_THROW((void)convergence_rates({{16, 1e-2}, {8, 1e-3}}), std::invalid_argument);
}

TEST(Rates, CsvLayout)
{
    const auto t = convergence_table({4, 8}, {1e-2, 1.25e-3}, {2e-2, 5e-3});
    const auto csv = format_convergence_csv(t);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,err_u,rate_u,err_c,rate_c");
    EXPECT_NE(csv.find("\n4,0.01,,0.02,\n"), std::string::npos);
    EXPECT_NE(csv.find("\n8,0.00125,3,0.005,2\n"), std::string::npos);
}

// ---------------------------------------------------------------- time series

TEST(Timeseries, HeaderOnlyAndOneRecord)
{
    EXPECT_EQ(format_timeseries({}), "t,mass_u,mass_c,energy,min_u,max_u,min_c,theta_min\n");
    DiagnosticsRecord r;
    r.t = 0.5;
    r.theta_min = 0.75;
    const auto s = format_timeseries({r});
    EXPECT_EQ(count_lines(s), 2u);
    EXPECT_NE(s.find("\n0.5,0,0,0,0,0,0,0.75\n"), std::string::npos);
}

TEST(Timeseries, RoundTripIsExact)
{
    std::vector<DiagnosticsRecord> recs;
    for (int i = 0; i < 20; ++i) {
        DiagnosticsRecord r;
        r.t = i * 0.1 / 3.0;
        r.mass_u = std::numbers::pi * (1.0 + 1e-13 * i);
        r.mass_c = std::exp(-0.37 * i);
        r.energy = -std::sqrt(2.0) * i;
        r.min_u = 1e-300 * i;
        r.max_u = 1.0 - 1e-16 * i;
        r.min_c = 123456.789e-20;
        r.theta_min = 1.0 / (i + 1);
        recs.push_back(r);
    }
    const auto dir = scratch_dir("ts");
    write_timeseries(recs, dir / "ts.csv");
    const auto back = read_timeseries(dir / "ts.csv");
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].t, recs[i].t);
        EXPECT_EQ(back[i].mass_u, recs[i].mass_u);
        EXPECT_EQ(back[i].mass_c, recs[i].mass_c);
        EXPECT_EQ(back[i].energy, recs[i].energy);
        EXPECT_EQ(back[i].min_u, recs[i].min_u);
        EXPECT_EQ(back[i].max_u, recs[i].max_u);
        EXPECT_EQ(back[i].min_c, recs[i].min_c);
        EXPECT_EQ(back[i].theta_min, recs[i].theta_min);
    }
    EXPECT_THROW((void)parse_timeseries("t,mass\n"), std::runtime_error);
    EXPECT_THROW((void)parse_timeseries(std::string(kTimeseriesHeader) + "\n1,2,3\n"), std::runtime_error);
}

// ---------------------------------------------------------------- snapshots

TEST(Snapshot, ConstantField)
{
    const auto sp = make_space(build_mesh(rectangle(0.0, 1.0, 0.0, 1.0), 3, BoundaryKind::Periodic), 2);
    const auto snap = parse_snapshot(format_snapshot(DGField(sp, 0.5), "u", 0.0));
    EXPECT_EQ(snap.values.size(), 9u * 16u);
    for (double v : snap.values)
        EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Snapshot, OneDimensionalLayout)
{
    const auto sp = make_space(build_mesh(interval(0.0, 2.0 * std::numbers::pi), 4, BoundaryKind::Periodic), 1);
    const auto f = interpolate([](double x, double) { return std::sin(x); }, sp);
    const auto text = format_snapshot(f, "u", 0.25);
    const auto snap = parse_snapshot(text);
    ASSERT_EQ(snap.values.size(), 12u);
    for (int e = 0; e < 4; ++e)
        for (int i = 1; i < 3; ++i)
            EXPECT_GT(snap.points[e * 3 + i][0], snap.points[e * 3 + i - 1][0]);
    EXPECT_EQ(snap.meta.field, "u");
    EXPECT_EQ(snap.meta.t, 0.25);
    EXPECT_EQ(snap.meta.samples_per_axis, 3);
    EXPECT_EQ(text.substr(0, text.find('\n')), "# ksddg snapshot");
    EXPECT_NE(text.find("# columns = x,value\n"), std::string::npos);
}

TEST(Snapshot, ReinterpolationRoundTrip)
{
    for (int dim : {1, 2})
        for (int k : {1, 2, 3}) {
            const auto mesh = dim == 1 ? build_mesh(interval(-1.0, 2.0), 5, BoundaryKind::ZeroFlux)
                                       : build_mesh(rectangle(-0.5, 0.5, 0.0, 2.0), {3, 4}, BoundaryKind::Periodic);
            const auto sp = make_space(mesh, k);
            const auto f = interpolate([](double x, double y) { return std::exp(x) * std::cos(3.0 * y) + x * y; }, sp);
            const auto dir = scratch_dir("snap");
            write_snapshot(f, "c", 1.5, dir / "s.txt");
            const auto snap = read_snapshot(dir / "s.txt");
            const auto g = snapshot_to_field(snap);
            ASSERT_EQ(g.size(), f.size());
            EXPECT_EQ(g.space().mesh().boundary(), mesh.boundary());
            for (std::size_t i = 0; i < f.size(); ++i)
                EXPECT_NEAR(g[i], f[i], 1e-12) << dim << "D k=" << k;
        }
}

TEST(Snapshot, RejectsTruncatedFiles)
{
    const auto sp = make_space(build_mesh(interval(0.0, 1.0), 2, BoundaryKind::Periodic), 1);
    auto text = format_snapshot(DGField(sp, 1.0), "u", 0.0);
    text.erase(text.rfind('\n', text.size() - 2) + 1);
    EXPECT_THROW((void)parse_snapshot(text), std::runtime_error);
    EXPECT_THROW((void)parse_snapshot("1,2\n"), std::runtime_error);
}

// ---------------------------------------------------------------- runner

TEST(Runner, ConvergenceSweepWritesArtifacts)
{
    auto cfg = default_config(Experiment::Conv1d);
    cfg.N = {8, 16, 32};
    cfg.output_dir = scratch_dir("sweep").string();
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.table.size(), 3u);
    EXPECT_NEAR(*res.table[2].rate_u, 2.0, 0.15);
    for (const char* f : {"convergence.csv", "summary.txt", "timeseries_N8.csv", "timeseries_N32.csv"})
        EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / f)) << f;
    const auto ts = read_timeseries(fs::path(cfg.output_dir) / "timeseries_N16.csv");
    EXPECT_EQ(ts.front().t, 0.0);
    EXPECT_EQ(ts.back().t, 0.01);
    for (const auto& r : ts) {
        EXPECT_GT(r.min_u, 0.0);
        EXPECT_LT(r.max_u, 1.0);
    }
}

TEST(Runner, RunsAreByteIdentical)
{
    auto cfg = default_config(Experiment::Conv1d, 2);
    cfg.N = {4, 8, 16};
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
    cfg.output_dir = a.string();
    run_experiment(cfg);
    cfg.output_dir = b.string();
    run_experiment(cfg);
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto other = b / entry.path().filename();
        ASSERT_TRUE(fs::exists(other));
        EXPECT_EQ(read_text_file(entry.path()), read_text_file(other)) << entry.path();
        ++compared;
    }
    EXPECT_EQ(compared, 5);
}

TEST(Runner, SnapshotsAtRequestedTimes)
{
    auto cfg = default_config(Experiment::Equilibrium);
    cfg.N = {8};
    cfg.T_final = 0.002;
    cfg.snapshot_times = {0.0, 0.001, 0.002};
    cfg.output_dir = scratch_dir("snaps").string();
    const auto res = run_experiment(cfg);
    for (int i = 0; i < 3; ++i) {
        const auto path = fs::path(cfg.output_dir) / ("snapshot_u_0" + std::to_string(i) + ".txt");
        ASSERT_TRUE(fs::exists(path));
        EXPECT_EQ(read_snapshot(path).meta.t, cfg.snapshot_times[i]);
    }
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "snapshot_c_02.txt"));
    const auto& s = res.runs.front().series;
    EXPECT_NEAR(s.back().mass_u, s.front().mass_u, 1e-12 * s.front().mass_u);
}

TEST(Runner, InitialPairsAreCentred)
{
    const auto b = initial_pair(default_config(Experiment::Blowup));
    EXPECT_DOUBLE_EQ(b.u(0.0, 0.0), 840.0);
    EXPECT_DOUBLE_EQ(b.c(0.0, 0.0), 420.0);
    const auto e = initial_pair(default_config(Experiment::Equilibrium));
    EXPECT_DOUBLE_EQ(e.u(0.5, 0.5), 0.8);
    EXPECT_NEAR(e.c(0.25, 0.25), 0.11, 1e-15);
    const auto sp = make_space(build_mesh(interval(0.0, 1.0), 3, BoundaryKind::Periodic), 2);
    auto f = DGField(sp, 0.1);
    f[4] = 0.9;
    const auto pk = nodal_peak(f);
    EXPECT_EQ(pk.value, 0.9);
    EXPECT_EQ(pk.element, 1);
}
