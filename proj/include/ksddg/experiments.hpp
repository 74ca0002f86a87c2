#pragma once

#include "config.hpp"
#include "io.hpp"
#include "stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ksddg {

struct InitialPair {
    std::function<double(double, double)> u;
    std::function<double(double, double)> c;
    std::optional<ManufacturedPair> exact; ///< set for the manufactured families
};

inline InitialPair initial_pair(const ExperimentConfig& cfg)
{
    const Domain& d = cfg.domain;
    const double xc = 0.5 * (d.lower[0] + d.upper[0]);
    const double yc = d.dim == 2 ? 0.5 * (d.lower[1] + d.upper[1]) : 0.0;
    InitialPair p;
    switch (cfg.initial) {
    case InitialData::Mms1d:
    case InitialData::Mms2d: {
        p.exact = cfg.initial == InitialData::Mms1d ? smooth_solution_1d() : smooth_solution_2d();
        const ManufacturedPair ex = *p.exact;
        p.u = [ex](double x, double y) { return ex.u.value(x, y, 0.0); };
        p.c = [ex](double x, double y) { return ex.c.value(x, y, 0.0); };
        break;
    }
    case InitialData::Equilibrium:
        p.u = [=](double x, double y) { return 0.8 * std::exp(-std::hypot(x - xc, y - yc) / 0.05); };
        p.c = [](double x, double y) {
            constexpr double tp = 2.0 * std::numbers::pi;
            return 0.1 * (1.0 + 0.1 * std::sin(tp * x) * std::sin(tp * y));
        };
        break;
    case InitialData::Blowup:
        p.u = [=](double x, double y) {
            const double r2 = (x - xc) * (x - xc) + (y - yc) * (y - yc);
            return 840.0 * std::exp(-84.0 * r2);
        };
        p.c = [=](double x, double y) {
            const double r2 = (x - xc) * (x - xc) + (y - yc) * (y - yc);
            return 420.0 * std::exp(-42.0 * r2);
        };
        break;
    case InitialData::Uniform: {
        const double a = cfg.uniform_u;
        const double b = a / cfg.params.alpha;
        p.u = [a](double, double) { return a; };
        p.c = [b](double, double) { return b; };
        break;
    }
    }
    return p;
}

struct Peak {
    double value = -std::numeric_limits<double>::infinity();
    std::array<double, 2> x{};
    int element = -1;
};

/// Largest nodal value and where it sits.
inline Peak nodal_peak(const DGField& f)
{
    const auto& sp = f.space();
    Peak p;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto w = f.element(e);
        for (int q = 0; q < sp.nodes_per_element(); ++q)
            if (w[q] > p.value) {
                p.value = w[q];
                p.x = sp.node_coords(e, q);
                p.element = e;
            }
    }
    return p;
}

struct RunResult {
    int N = 0;
    long steps = 0;
    double dt = 0.0;
    std::vector<DiagnosticsRecord> series; ///< initial state first, then one record per step
    std::optional<double> err_u;           ///< L2 errors at T_final against the exact pair
    std::optional<double> err_c;
    Peak peak;                 ///< of u at T_final
    int max_newton_iterations = 0;
    long limited_elements = 0; ///< summed over steps, u and c
    std::vector<std::filesystem::path> files;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RunResult> runs;
    std::vector<ConvergenceRow> table; ///< sweeps only
    std::vector<std::filesystem::path> files;
};

/// One simulation at resolution N. When `dir` is set, writes the time series and the
/// requested snapshots there, with `tag` appended to every file name.
inline RunResult run_single(const ExperimentConfig& cfg, int N, const std::optional<std::filesystem::path>& dir,
    const std::string& tag = "")
{
    const Mesh mesh = build_mesh(cfg.domain, N, cfg.bc);
    auto space = make_space(mesh, cfg.degree);
    const InitialPair init = initial_pair(cfg);
    std::optional<SourceTerms> sources;
    if (cfg.mms_sources)
        sources = mms_sources(init.exact->u, init.exact->c, cfg.params, cfg.model);
    KSSolver solver(space, cfg.params, cfg.model, cfg.flux(), cfg.step, sources);

    RunResult res;
    res.N = N;
    res.dt = solver.time_step();
    SimulationState state = solver.initial_state(init.u, init.c);
    res.series.push_back(solver.diagnostics(state));

    std::vector<double> snaps = cfg.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    auto snapshot = [&](const SimulationState& s) {
        if (!dir)
            return;
        const auto it = std::find(snaps.begin(), snaps.end(), s.t);
        if (it == snaps.end())
            return;
        char idx[16];
        std::snprintf(idx, sizeof idx, "%02d", static_cast<int>(it - snaps.begin()));
        for (const auto& [name, field] : {std::pair{"u", &s.u}, std::pair{"c", &s.c}}) {
            const auto path = *dir / ("snapshot_" + std::string(name) + "_" + idx + tag + ".txt");
            write_snapshot(*field, name, s.t, path);
            res.files.push_back(path);
        }
    };
    snapshot(state);

    auto records = solver.run_to_time(state, cfg.T_final, snaps, snapshot);
    res.steps = static_cast<long>(records.size());
    for (const auto& r : records) {
        res.max_newton_iterations = std::max(res.max_newton_iterations, r.newton_iterations);
        res.limited_elements += r.limited_u + r.limited_c;
    }
    res.series.insert(res.series.end(), records.begin(), records.end());
    res.peak = nodal_peak(state.u);

    if (init.exact) {
        const ManufacturedPair& ex = *init.exact;
        const double T = state.t;
        res.err_u = l2_error(state.u, [&](double x, double y) { return ex.u.value(x, y, T); });
        res.err_c = l2_error(state.c, [&](double x, double y) { return ex.c.value(x, y, T); });
    }
    if (dir) {
        const auto path = *dir / ("timeseries" + tag + ".csv");
        write_timeseries(res.series, path);
        res.files.push_back(path);
    }
    return res;
}

inline std::string format_summary(const ExperimentResult& r)
{
    const ExperimentConfig& c = r.config;
    const FluxParams f = c.flux();
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    kv("experiment", to_string(c.experiment));
    kv("degree", std::to_string(c.degree));
    kv("flux", format_double(f.beta0) + "," + format_double(f.beta1));
    kv("mobility", to_string(c.model));
    kv("boundary", to_string(c.bc));
    kv("chi,D,alpha,beta", format_double(c.params.chi) + "," + format_double(c.params.D) + ","
            + format_double(c.params.alpha) + "," + format_double(c.params.beta));
    kv("T_final", format_double(c.T_final));
    for (const auto& run : r.runs) {
        const auto& first = run.series.front();
        const auto& last = run.series.back();
        double theta = 1.0;
        double energy_rise = -std::numeric_limits<double>::infinity();
        double drift = 0.0;
        for (std::size_t i = 0; i < run.series.size(); ++i) {
            theta = std::min(theta, run.series[i].theta_min);
            drift = std::max(drift, std::abs(run.series[i].mass_u - first.mass_u) / std::abs(first.mass_u));
            if (i > 0)
                energy_rise = std::max(energy_rise, run.series[i].energy - run.series[i - 1].energy);
        }
        s += "\n[N = " + std::to_string(run.N) + "]\n";
        kv("steps", std::to_string(run.steps));
        kv("dt", format_double(run.dt));
        kv("t", format_double(last.t));
        kv("mass_u", format_double(first.mass_u) + " -> " + format_double(last.mass_u));
        kv("max_relative_mass_drift", format_double(drift));
        kv("energy", format_double(first.energy) + " -> " + format_double(last.energy));
        kv("max_energy_increment", run.steps ? format_double(energy_rise) : "-");
        kv("u_range", format_double(last.min_u) + "," + format_double(last.max_u));
        kv("min_c", format_double(last.min_c));
        kv("theta_min", format_double(theta));
        kv("limited_elements", std::to_string(run.limited_elements));
        kv("max_newton_iterations", std::to_string(run.max_newton_iterations));
        kv("peak_u", format_double(run.peak.value) + " at " + format_double(run.peak.x[0])
                + (c.domain.dim == 2 ? "," + format_double(run.peak.x[1]) : ""));
        if (run.err_u)
            kv("l2_error_u,c", format_double(*run.err_u) + "," + format_double(*run.err_c));
    }
    if (!r.table.empty())
        s += "\n" + format_convergence_table(r.table);
    return s;
}

/// Run a validated configuration; sweeps run their resolutions concurrently. All files go
/// to config.output_dir unless `write` is false. Results do not depend on scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& config, bool write = true)
{
    config.validate();
    ExperimentResult out;
    out.config = config;
    std::optional<std::filesystem::path> dir;
    if (write) {
        dir = std::filesystem::path(config.output_dir);
        std::filesystem::create_directories(*dir);
    }

    if (config.is_sweep()) {
        std::vector<std::future<RunResult>> jobs;
        for (int N : config.N)
            jobs.push_back(std::async(std::launch::async,
                [&config, dir, N] { return run_single(config, N, dir, "_N" + std::to_string(N)); }));
        for (auto& j : jobs)
            out.runs.push_back(j.get());
        std::vector<double> eu, ec;
        for (const auto& r : out.runs) {
            eu.push_back(*r.err_u);
            ec.push_back(*r.err_c);
        }
        out.table = convergence_table(config.N, eu, ec);
        if (dir) {
            write_text_file(*dir / "convergence.csv", format_convergence_csv(out.table));
            out.files.push_back(*dir / "convergence.csv");
        }
    } else {
        out.runs.push_back(run_single(config, config.N.front(), dir));
    }
    for (const auto& r : out.runs)
        out.files.insert(out.files.end(), r.files.begin(), r.files.end());
    if (dir) {
        write_text_file(*dir / "summary.txt", format_summary(out));
        out.files.push_back(*dir / "summary.txt");
    }
    return out;
}

} // namespace ksddg
