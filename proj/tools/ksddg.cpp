#include <ksddg/ksddg.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

void report(const ksddg::ExperimentResult& r, double seconds)
{
    std::printf("%s: %zu run(s), %.1f s, output in %s\n", ksddg::to_string(r.config.experiment).c_str(),
        r.runs.size(), seconds, r.config.output_dir.c_str());
    for (const auto& run : r.runs) {
        const auto& first = run.series.front();
        const auto& last = run.series.back();
        std::printf("  N=%d steps=%ld t=%.6g mass_u %.12g -> %.12g energy %.8g -> %.8g max u %.6g\n", run.N,
            run.steps, last.t, first.mass_u, last.mass_u, first.energy, last.energy, last.max_u);
    }
    if (!r.table.empty())
        std::printf("%s", ksddg::format_convergence_table(r.table).c_str());
}

template <class F>
int guarded(F&& body)
{
    try {
        return body();
    } catch (const ksddg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const ksddg::SolverError& e) {
        std::fprintf(stderr, "solver failure at step %ld: %s\n", e.step(), e.what());
        if (!e.newton_log().empty()) {
            std::fprintf(stderr, "newton residuals:");
            for (double h : e.newton_log())
                std::fprintf(stderr, " %.3e", h);
            std::fprintf(stderr, "\n");
        }
        return kSolverError;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return kSolverError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

double elapsed(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Keller-Segel DDG solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
    run->add_option("--set", sets, "override, section.key=value (repeatable)");

    std::string experiment;
    std::vector<int> degrees{1, 2};
    std::string table_dir = "out/table";
    auto* table = app.add_subcommand("table", "convergence sweep with rates");
    table->add_option("--experiment", experiment, "conv1d or conv2d")
        ->required()
        ->check(CLI::IsMember({"conv1d", "conv2d"}));
    table->add_option("--degrees", degrees, "polynomial degrees")->delimiter(',');
    table->add_option("--output", table_dir, "output directory");
    table->add_option("--set", sets, "override, section.key=value (repeatable)");

    int k = 1;
    double beta0 = 7.0 / 6.0;
    double beta1 = 0.0;
    double phi0 = 1.0;
    double phi1 = 1.0;
    auto* info = app.add_subcommand("info", "Gamma(beta1) and the admissibility margin of a flux");
    info->add_option("--k", k, "polynomial degree")->required()->check(CLI::PositiveNumber);
    info->add_option("--beta0", beta0, "flux beta0")->required();
    info->add_option("--beta1", beta1, "flux beta1")->required();
    info->add_option("--phi0", phi0, "lower mobility bound");
    info->add_option("--phi1", phi1, "upper mobility bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    if (*run)
        return guarded([&] {
            const auto cfg = ksddg::load_config(config_path, sets);
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = ksddg::run_experiment(cfg);
            report(res, elapsed(t0));
            return 0;
        });

    if (*table)
        return guarded([&] {
            for (int deg : degrees) {
                std::vector<std::string> all{"mesh.degree=" + std::to_string(deg),
                    "output.dir=" + table_dir + "/" + experiment + "_k" + std::to_string(deg)};
                all.insert(all.end(), sets.begin(), sets.end());
                const auto cfg = ksddg::parse_config_string("experiment = " + experiment + "\n", all);
                const auto f = cfg.flux();
                std::printf("%s, k=%d, flux (%g, %g)\n", experiment.c_str(), deg, f.beta0, f.beta1);
                const auto t0 = std::chrono::steady_clock::now();
                const auto res = ksddg::run_experiment(cfg);
                std::printf("%s(%.1f s)\n\n", ksddg::format_convergence_table(res.table).c_str(), elapsed(t0));
            }
            return 0;
        });

    return guarded([&] {
        const ksddg::FluxParams flux{beta0, beta1};
        ksddg::Admissibility a;
        try {
            flux.validate();
            a = ksddg::check_admissible(flux, phi0, phi1, k);
        } catch (const std::invalid_argument& e) {
            throw ksddg::ConfigError(e.what());
        }
        std::printf("k = %d\nbeta0 = %.17g\nbeta1 = %.17g\nGamma(beta1) = %.17g\n", k, beta0, beta1, a.gamma);
        std::printf("phi0 = %.17g\nphi1 = %.17g\nmargin = %.17g\nrequired_beta0 = %.17g\nadmissible = %s\n", phi0,
            phi1, a.margin, a.required_beta0, a.admissible ? "yes" : "no");
        return 0;
    });
}
