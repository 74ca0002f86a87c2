#include <ksddg/experiments.hpp>
#include <ksddg/stepper.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace ksddg;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const KSParams kSmooth = KSParams::from_B(0.1, 0.2, 0.2, 0.01);

struct Smooth1d {
    std::shared_ptr<const DGSpace> space;
    ManufacturedPair exact = smooth_solution_1d();
    std::unique_ptr<KSSolver> solver;
    SimulationState state;

    Smooth1d(int N, int k, bool sources, StepConfig cfg = {})
    {
        space = make_space(build_mesh(interval(0.0, kTwoPi), N, BoundaryKind::Periodic), k);
        std::optional<SourceTerms> src;
        if (sources)
            src = mms_sources(exact.u, exact.c, kSmooth, MobilityModel::Saturated);
        solver = std::make_unique<KSSolver>(space, kSmooth, MobilityModel::Saturated, reproduction_flux(k), cfg, src);
        state = solver->initial_state([this](double x, double y) { return exact.u.value(x, y, 0.0); },
            [this](double x, double y) { return exact.c.value(x, y, 0.0); });
    }
};

double linf_diff(const DGField& a, const DGField& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST(StepConfig, Validation)
{
    StepConfig c;
    EXPECT_NO_THROW(c.validate());
    c.damping = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.dt_rule = DtRule::Fixed;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.dt = 1e-3;
    EXPECT_NO_THROW(c.validate());
    const auto mesh = build_mesh(interval(0.0, 1.0), 10, BoundaryKind::Periodic);
    EXPECT_DOUBLE_EQ(StepConfig{}.time_step(mesh), 0.01 * 0.01);
}

TEST(StepC, InertiaDominatedLimitKeepsC)
{
    const auto sp = make_space(build_mesh(interval(0.0, kTwoPi), 16, BoundaryKind::Periodic), 2);
    KSParams p = kSmooth;
    p.beta = 1e6;
    KSSolver s(sp, p, MobilityModel::Saturated, reproduction_flux(2), StepConfig{});
    const auto u = interpolate([](double x, double) { return 0.5 + 0.3 * std::sin(x); }, sp);
    const auto c = interpolate([](double x, double) { return 2.0 + std::cos(x); }, sp);
    const auto [c1, st] = s.step_c(u, c, 1e-3);
    EXPECT_TRUE(st.converged);
    EXPECT_LT(linf_diff(c1, c), 1e-8);
}

TEST(StepC, SteadyPairIsFixed)
{
    const auto sp = make_space(build_mesh(rectangle(0.0, 1.0, 0.0, 1.0), 4, BoundaryKind::ZeroFlux), 2);
    KSSolver s(sp, kSmooth, MobilityModel::Saturated, reproduction_flux(2), StepConfig{});
    const DGField u(sp, 0.3), c(sp, 0.3 / kSmooth.alpha);
    EXPECT_LT(linf_diff(s.step_c(u, c, 1e-3).first, c), 1e-11);
    const auto [u1, ns] = s.step_u(u, c, 1e-3);
    EXPECT_TRUE(ns.converged);
    EXPECT_LT(linf_diff(u1, u), 1e-12);
}

TEST(StepC, GmresPathForNonSymmetricFlux)
{
    const auto sp = make_space(build_mesh(interval(0.0, kTwoPi), 16, BoundaryKind::Periodic), 2);
    KSSolver s(sp, kSmooth, MobilityModel::Saturated, FluxParams{4.0, 1.0 / 12.0}, StepConfig{});
    const auto u = interpolate([](double x, double) { return 0.5 + 0.3 * std::sin(x); }, sp);
    const auto c = interpolate([](double x, double) { return 2.0 + std::cos(x); }, sp);
    const auto [c1, st] = s.step_c(u, c, 1e-3);
    EXPECT_TRUE(st.converged);
    // The c-step conserves sum M (beta c + h_t alpha c - h_t u) shifts: (beta/h + alpha) int c1 = beta/h int c + int u.
    const double lhs = (kSmooth.beta / 1e-3 + kSmooth.alpha) * integral(c1);
    const double rhs = kSmooth.beta / 1e-3 * integral(c) + integral(u);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(rhs));
}

TEST(StepU, ConservesMassPerStep)
{
    Smooth1d ex(32, 2, false);
    const double h = ex.solver->time_step();
    const double m0 = integral(ex.state.u);
    const auto [c1, st] = ex.solver->step_c(ex.state.u, ex.state.c, h);
    const auto [u1, ns] = ex.solver->step_u(ex.state.u, c1, h);
    EXPECT_TRUE(ns.converged);
    EXPECT_NEAR(integral(u1), m0, 1e-12 * m0);
}

TEST(StepU, NewtonConvergesQuadratically)
{
    StepConfig cfg;
    cfg.dt_rule = DtRule::Fixed;
    cfg.dt = 2e-2;
    Smooth1d ex(32, 2, true, cfg);
    int checked = 0;
    double worst = 0.0;
    for (int step = 0; step < 3; ++step) {
        const auto rep = ex.solver->advance(ex.state, cfg.dt);
        const auto& h = rep.newton.history;
        ASSERT_TRUE(rep.newton.converged);
        for (std::size_t i = 0; i + 1 < h.size(); ++i) {
            if (h[i + 1] < 1e-14)
                continue; // round-off floor
            worst = std::max(worst, h[i + 1] / (h[i] * h[i]));
            ++checked;
        }
    }
    EXPECT_GT(checked, 0);
    EXPECT_LT(worst, 1e3);
}

TEST(StepU, OneStepErrorFollowsTheFittedBound)
{
    // Fit C in err <= C (h_t + h^3) on N = 16, 32; check N = 64 against it.
    auto one_step = [](int N) {
        Smooth1d ex(N, 2, true);
        const double h_t = ex.solver->time_step();
        ex.solver->advance(ex.state, h_t);
        const double h = kTwoPi / N;
        const double eu = l2_error(ex.state.u, [&](double x, double y) { return ex.exact.u.value(x, y, h_t); });
        const double ec = l2_error(ex.state.c, [&](double x, double y) { return ex.exact.c.value(x, y, h_t); });
        return std::array<double, 3>{eu, ec, h_t + h * h * h};
    };
    const auto a = one_step(16);
    const auto b = one_step(32);
    const double Cu = std::max(a[0] / a[2], b[0] / b[2]);
    const double Cc = std::max(a[1] / a[2], b[1] / b[2]);
    const auto c = one_step(64);
    EXPECT_LE(c[0], 1.5 * Cu * c[2]);
    EXPECT_LE(c[1], 1.5 * Cc * c[2]);
}

TEST(Advance, SteadyStateHundredSteps)
{
    const auto sp = make_space(build_mesh(interval(0.0, kTwoPi), 16, BoundaryKind::Periodic), 2);
    KSSolver s(sp, kSmooth, MobilityModel::Saturated, reproduction_flux(2), StepConfig{});
    auto st = s.initial_state([](double, double) { return 0.3; }, [](double, double) { return 0.3 / 0.2; });
    const auto u0 = st.u, c0 = st.c;
    for (int i = 0; i < 100; ++i) {
        const auto rep = s.advance(st, s.time_step());
        EXPECT_EQ(rep.u_limiter.theta_min(), 1.0);
    }
    EXPECT_LT(linf_diff(st.u, u0), 1e-9);
    EXPECT_LT(linf_diff(st.c, c0), 1e-9);
    EXPECT_EQ(st.step, 100);
}

TEST(Advance, EnergyDecreasesOnSmoothData)
{
    Smooth1d ex(32, 2, false);
    for (int i = 0; i < 50; ++i) {
        const auto rep = ex.solver->advance(ex.state, ex.solver->time_step());
        EXPECT_LE(rep.energy_after, rep.energy_before + 1e-12);
        EXPECT_NEAR(rep.mass_after, rep.mass_before, 1e-12 * rep.mass_before);
        EXPECT_EQ(rep.u_limiter.limited, 0);
        EXPECT_GT(rep.cfl_ratio, 0.0);
    }
}

TEST(Advance, BlowupPeakGrowsInEarlySteps)
{
    auto cfg = default_config(Experiment::Blowup);
    const auto sp = make_space(build_mesh(cfg.domain, 32, cfg.bc), 2);
    const auto init = initial_pair(cfg);
    KSSolver s(sp, cfg.params, cfg.model, cfg.flux(), cfg.step);
    auto st = s.initial_state(init.u, init.c);
    double prev = nodal_extrema(st.u).second;
    for (int i = 0; i < 3; ++i) {
        s.advance(st, s.time_step());
        const double now = nodal_extrema(st.u).second;
        EXPECT_GT(now, prev);
        prev = now;
    }
}

TEST(Advance, NewtonFailureIsReportedWithItsStep)
{
    auto cfg = default_config(Experiment::Blowup);
    cfg.step.newton_max_iter = 1;
    const auto sp = make_space(build_mesh(cfg.domain, 8, cfg.bc), 2);
    const auto init = initial_pair(cfg);
    KSSolver s(sp, cfg.params, cfg.model, cfg.flux(), cfg.step);
    auto st = s.initial_state(init.u, init.c);
    try {
        s.advance(st, s.time_step());
        FAIL() << "expected a solver error";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.step(), 1);
        EXPECT_FALSE(e.newton_log().empty());
    }
}

TEST(RunToTime, NoOpAndLandsExactly)
{
    Smooth1d ex(8, 1, true);
    EXPECT_TRUE(ex.solver->run_to_time(ex.state, 0.0).empty());
    EXPECT_THROW((void)ex.solver->run_to_time(ex.state, -1.0), std::invalid_argument);
    std::vector<double> stops;
    const auto rec = ex.solver->run_to_time(ex.state, 0.01, {0.003}, [&](const SimulationState& s) {
        stops.push_back(s.t);
    });
    EXPECT_EQ(ex.state.t, 0.01);
    EXPECT_EQ(rec.back().t, 0.01);
    EXPECT_EQ(stops, (std::vector<double>{0.003, 0.01}));
    for (std::size_t i = 1; i < rec.size(); ++i)
        EXPECT_GT(rec[i].t, rec[i - 1].t);
}

TEST(RunToTime, SmoothDataMassAndEnergyToHalf)
{
    Smooth1d ex(64, 2, false);
    const double m0 = integral(ex.state.u);
    double e_prev = ex.solver->diagnostics(ex.state).energy;
    const auto rec = ex.solver->run_to_time(ex.state, 0.5);
    for (const auto& r : rec) {
        EXPECT_LE(std::abs(r.mass_u - m0), 1e-10 * m0);
        EXPECT_LE(r.energy, e_prev + 1e-12);
        EXPECT_GT(r.min_u, 0.0);
        EXPECT_LT(r.max_u, 1.0);
        e_prev = r.energy;
    }
}

TEST(RunToTime, BumpRelaxesToUniformState)
{
    const auto cfg = default_config(Experiment::Equilibrium);
    const auto sp = make_space(build_mesh(cfg.domain, 32, cfg.bc), 1);
    const auto init = initial_pair(cfg);
    KSSolver s(sp, cfg.params, cfg.model, cfg.flux(), cfg.step);
    auto st = s.initial_state(init.u, init.c);
    const double ubar = integral(st.u) / cfg.domain.measure();
    auto dev = [&](const DGField& u) {
        double m = 0.0;
        for (double v : u.values())
            m = std::max(m, std::abs(v - ubar));
        return m;
    };
    double at_01 = -1.0;
    s.run_to_time(st, cfg.T_final, {0.1}, [&](const SimulationState& x) {
        if (x.t == 0.1)
            at_01 = dev(x.u);
    });
    ASSERT_GT(at_01, 0.0);
    EXPECT_LT(dev(st.u), at_01);
}
