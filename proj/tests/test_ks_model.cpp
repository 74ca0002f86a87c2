#include "oracles.hpp"

#include <ksddg/ks_model.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace ksddg;

TEST(Model, MobilityTimesGPrimeIsOne)
{
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> d(1e-6, 1.0 - 1e-6);
    for (int i = 0; i < 1000; ++i) {
        const double u = d(rng);
        EXPECT_NEAR(mobility_phi(u, MobilityModel::Saturated) * potential_dg(u, MobilityModel::Saturated), 1.0, 1e-12);
        const double v = 50.0 * u;
        EXPECT_NEAR(mobility_phi(v, MobilityModel::Linear) * potential_dg(v, MobilityModel::Linear), 1.0, 1e-12);
    }
}

TEST(Model, GInverseRoundTrip)
{
    for (double u : {1e-12, 0.1, 0.5, 0.9, 1.0 - 1e-9}) {
        EXPECT_NEAR(potential_g_inverse(potential_g(u, MobilityModel::Saturated), MobilityModel::Saturated), u,
            1e-12 * std::max(u, 1e-3));
        EXPECT_NEAR(potential_g_inverse(potential_g(u * 100, MobilityModel::Linear), MobilityModel::Linear), u * 100,
            1e-12 * u * 100);
    }
    EXPECT_GT(potential_g_inverse(-1e4, MobilityModel::Saturated), 0.0);
    EXPECT_LT(potential_g_inverse(1e4, MobilityModel::Saturated), 1.0);
}

TEST(Model, DomainErrors)
{
    EXPECT_THROW((void)potential_g(0.0, MobilityModel::Saturated), std::domain_error);
    EXPECT_THROW((void)potential_g(1.0, MobilityModel::Saturated), std::domain_error);
    EXPECT_THROW((void)potential_g(-1.0, MobilityModel::Linear), std::domain_error);
    EXPECT_THROW((void)mobility_phi(1.5, MobilityModel::Saturated), std::domain_error);
    EXPECT_THROW(KSParams({0.0, 1.0, 1.0, 1.0}).validate(), std::invalid_argument);
}

TEST(Model, UniformEnergyValue)
{
    // B F(1/2) |Omega| = 0.2 ln(1/2) 2 pi.
    const auto sp = make_space(build_mesh(interval(0.0, 2.0 * std::numbers::pi), 16, BoundaryKind::Periodic), 2);
    const auto E = discrete_free_energy(DGField(sp, 0.5), DGField(sp, 0.0), KSParams::from_B(0.1, 0.2, 0.2, 0.01),
        MobilityModel::Saturated);
    EXPECT_NEAR(E.total, -0.8710, 5e-5);
    EXPECT_NEAR(E.total, 0.2 * std::log(0.5) * 2.0 * std::numbers::pi, 1e-12);
}

TEST(Model, ConvexSplitIdentityAndConvexity)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(0.01, 0.99);
    const KSParams p = KSParams::from_B(0.1, 0.5, 0.02, 1.0);
    for (int dim : {1, 2}) {
        const auto mesh = dim == 1 ? build_mesh(interval(0.0, 1.0), 6, BoundaryKind::Periodic)
                                   : build_mesh(rectangle(0.0, 1.0, 0.0, 1.0), 3, BoundaryKind::ZeroFlux);
        const auto sp = make_space(mesh, 2);
        auto random_pair = [&] {
            DGField u(sp), c(sp);
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] = d(rng);
                c[i] = 3.0 * d(rng);
            }
            return std::pair{u, c};
        };
        for (double gamma : {0.5, 1.0, 2.0}) {
            for (int trial = 0; trial < 10; ++trial) {
                const auto [u, c] = random_pair();
                const auto E = discrete_free_energy(u, c, p, MobilityModel::Saturated, gamma);
                EXPECT_NEAR(E.total, E.convex - E.concave, 1e-12 * (1.0 + std::abs(E.convex)));

                const auto [u2, c2] = random_pair();
                DGField um(sp), cm(sp);
                for (std::size_t i = 0; i < u.size(); ++i) {
                    um[i] = 0.5 * (u[i] + u2[i]);
                    cm[i] = 0.5 * (c[i] + c2[i]);
                }
                const auto [a, ea] = convex_split_energies(u, c, p, MobilityModel::Saturated, gamma);
                const auto [b, eb] = convex_split_energies(u2, c2, p, MobilityModel::Saturated, gamma);
                const auto [m, em] = convex_split_energies(um, cm, p, MobilityModel::Saturated, gamma);
                EXPECT_LE(m, 0.5 * (a + b) + 1e-12);
                EXPECT_LE(em, 0.5 * (ea + eb) + 1e-12);
            }
        }
    }
}

TEST(Model, ChemicalPotentialIsNodal)
{
    const auto sp = make_space(build_mesh(interval(0.0, 1.0), 2, BoundaryKind::Periodic), 1);
    const KSParams p = KSParams::from_B(0.1, 0.2, 0.2, 0.01);
    const auto mu = chemical_potential_mu_u(DGField(sp, 0.5), DGField(sp, 0.25), p, MobilityModel::Saturated);
    for (double v : mu.values())
        EXPECT_NEAR(v, -0.25, 1e-15);
}

TEST(Model, ManufacturedSourcesMatchFiniteDifferences)
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> xs(0.0, 2.0 * std::numbers::pi), ts(0.0, 0.5);
    const KSParams p = KSParams::from_B(0.1, 0.2, 0.2, 0.01);
    for (int which : {1, 2}) {
        const auto mp = which == 1 ? smooth_solution_1d() : smooth_solution_2d();
        for (auto m : {MobilityModel::Saturated, MobilityModel::Linear}) {
            const auto src = mms_sources(mp.u, mp.c, p, m);
            for (int i = 0; i < 20; ++i) {
                const double x = xs(rng), y = which == 2 ? xs(rng) : 0.0, t = ts(rng);
                const auto fd = oracle::fd_sources(mp, p, m, x, y, t);
                const double fu = src.f_u(x, y, t);
                const double fc = src.f_c(x, y, t);
                EXPECT_LE(std::abs(fu - fd.f_u), 1e-6 * std::max(std::abs(fd.f_u), 1e-3));
                EXPECT_LE(std::abs(fc - fd.f_c), 1e-6 * std::max(std::abs(fd.f_c), 1e-3));
            }
        }
    }
}

TEST(Model, ExactPairDerivativesAreConsistent)
{
    const auto mp = smooth_solution_2d();
    const double x = 0.7, y = 1.9, t = 0.3;
    EXPECT_NEAR(mp.u.dx(x, y, t), oracle::d1([&](double s) { return mp.u.value(s, y, t); }, x), 1e-10);
    EXPECT_NEAR(mp.c.dy(x, y, t), oracle::d1([&](double s) { return mp.c.value(x, s, t); }, y), 1e-10);
    EXPECT_NEAR(mp.u.dt(x, y, t), oracle::d1([&](double s) { return mp.u.value(x, y, s); }, t), 1e-10);
}
