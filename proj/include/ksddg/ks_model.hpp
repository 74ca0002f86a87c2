#pragma once

#include "dg_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace ksddg {

/// Physical constants. The cell diffusion enters the scheme only through B = D/chi.
struct KSParams {
    double chi = 0.1;   ///< chemotactic sensitivity
    double D = 0.02;    ///< cell diffusivity
    double alpha = 0.2; ///< chemical decay
    double beta = 0.01; ///< chemical time scale

    [[nodiscard]] double B() const { return D / chi; }

    static KSParams from_B(double chi, double B, double alpha, double beta)
    {
        return {chi, B * chi, alpha, beta};
    }

    void validate() const
    {
        if (!(chi > 0.0 && D > 0.0 && alpha > 0.0 && beta > 0.0))
            throw std::invalid_argument("KSParams: chi, D, alpha, beta must all be positive");
    }
};

/// Saturated: F = u ln u + (1-u) ln(1-u), phi = u(1-u), u in (0,1).
/// Linear:    F = u ln u - u,               phi = u,      u in (0,inf).
enum class MobilityModel { Saturated, Linear };

inline std::string to_string(MobilityModel m) { return m == MobilityModel::Saturated ? "saturated" : "linear"; }

inline bool admissible(double u, MobilityModel m)
{
    return m == MobilityModel::Saturated ? (u > 0.0 && u < 1.0) : (u > 0.0 && std::isfinite(u));
}

namespace detail {
inline void require_admissible(double u, MobilityModel m, const char* who)
{
    if (!admissible(u, m))
        throw std::domain_error(std::string(who) + ": value outside the admissible range");
}
} // namespace detail

inline double mobility_phi(double u, MobilityModel m)
{
    if (m == MobilityModel::Saturated) {
        if (u < 0.0 || u > 1.0)
            throw std::domain_error("mobility_phi: value outside [0,1]");
        return u * (1.0 - u);
    }
    if (u < 0.0)
        throw std::domain_error("mobility_phi: negative density");
    return u;
}

/// phi'(u); used by the manufactured sources.
inline double mobility_dphi(double u, MobilityModel m)
{
    return m == MobilityModel::Saturated ? 1.0 - 2.0 * u : 1.0;
}

inline double potential_g(double u, MobilityModel m)
{
    detail::require_admissible(u, m, "potential_g");
    return m == MobilityModel::Saturated ? std::log(u) - std::log1p(-u) : std::log(u);
}

/// Inverse of g; the result is clamped into the open admissible range.
inline double potential_g_inverse(double w, MobilityModel m)
{
    const double tiny = std::numeric_limits<double>::min();
    if (m == MobilityModel::Saturated) {
        const double u = w >= 0.0 ? 1.0 / (1.0 + std::exp(-w)) : std::exp(w) / (1.0 + std::exp(w));
        return std::clamp(u, tiny, std::nextafter(1.0, 0.0));
    }
    return std::max(std::exp(w), tiny);
}

/// g'(u) = 1/phi(u).
inline double potential_dg(double u, MobilityModel m)
{
    detail::require_admissible(u, m, "potential_dg");
    return m == MobilityModel::Saturated ? 1.0 / u + 1.0 / (1.0 - u) : 1.0 / u;
}

inline double entropy_density(double u, MobilityModel m)
{
    detail::require_admissible(u, m, "entropy_density");
    return m == MobilityModel::Saturated ? u * std::log(u) + (1.0 - u) * std::log1p(-u)
                                         : u * std::log(u) - u;
}

/// Collocation interpolant of B g(u) - c.
inline DGField chemical_potential_mu_u(const DGField& u, const DGField& c, const KSParams& p, MobilityModel m)
{
    if (!u.same_space(c))
        throw std::invalid_argument("chemical_potential_mu_u: fields on different spaces");
    DGField mu(u.space_ptr());
    const double B = p.B();
    for (std::size_t i = 0; i < u.size(); ++i)
        mu[i] = B * potential_g(u[i], m) - c[i];
    return mu;
}

struct EnergyReport {
    double total = 0.0;
    double entropy = 0.0;  ///< int B F(u)
    double cross = 0.0;    ///< -int u c
    double chemical = 0.0; ///< 1/2 int |grad c|^2 + alpha c^2
    double convex = 0.0;   ///< E_c, when the split was evaluated
    double concave = 0.0;  ///< E_e, when the split was evaluated
};

/// Nodal-quadrature free energy; |grad c|^2 is the broken gradient at the nodes.
inline EnergyReport discrete_free_energy(const DGField& u, const DGField& c, const KSParams& p, MobilityModel m)
{
    if (!u.same_space(c))
        throw std::invalid_argument("discrete_free_energy: fields on different spaces");
    const auto& sp = u.space();
    const int n = sp.nodes_per_element();
    const double B = p.B();
    EnergyReport r;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto ue = u.element(e);
        const auto ce = c.element(e);
        for (int q = 0; q < n; ++q) {
            const double w = sp.weight(q);
            const auto g = sp.nodal_gradient(ce, q);
            r.entropy += w * B * entropy_density(ue[q], m);
            r.cross -= w * ue[q] * ce[q];
            r.chemical += w * 0.5 * (g[0] * g[0] + g[1] * g[1] + p.alpha * ce[q] * ce[q]);
        }
    }
    r.total = r.entropy + r.cross + r.chemical;
    return r;
}

/// E_c = int B F(u) + |grad c|^2/2 + alpha c^2/2 + (u/gamma - gamma c)^2/2,
/// E_e = int u^2/(2 gamma^2) + gamma^2 c^2/2, with E = E_c - E_e.
inline std::pair<double, double> convex_split_energies(
    const DGField& u, const DGField& c, const KSParams& p, MobilityModel m, double gamma = 1.0)
{
    if (!(gamma > 0.0))
        throw std::invalid_argument("convex_split_energies: gamma must be positive");
    if (!u.same_space(c))
        throw std::invalid_argument("convex_split_energies: fields on different spaces");
    const auto& sp = u.space();
    const int n = sp.nodes_per_element();
    const double B = p.B();
    const double g2 = gamma * gamma;
    double ec = 0.0;
    double ee = 0.0;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto ue = u.element(e);
        const auto ce = c.element(e);
        for (int q = 0; q < n; ++q) {
            const double w = sp.weight(q);
            const auto g = sp.nodal_gradient(ce, q);
            const double mix = ue[q] / gamma - gamma * ce[q];
            ec += w * (B * entropy_density(ue[q], m) + 0.5 * (g[0] * g[0] + g[1] * g[1])
                          + 0.5 * p.alpha * ce[q] * ce[q] + 0.5 * mix * mix);
            ee += w * (ue[q] * ue[q] / (2.0 * g2) + 0.5 * g2 * ce[q] * ce[q]);
        }
    }
    return {ec, ee};
}

/// Energy report including the convex split.
inline EnergyReport discrete_free_energy(
    const DGField& u, const DGField& c, const KSParams& p, MobilityModel m, double gamma)
{
    auto r = discrete_free_energy(u, c, p, m);
    std::tie(r.convex, r.concave) = convex_split_energies(u, c, p, m, gamma);
    return r;
}

using SpaceTimeFn = std::function<double(double x, double y, double t)>;

/// A smooth space-time field with the derivatives the source terms need.
struct ExactField {
    SpaceTimeFn value;
    SpaceTimeFn dt;
    SpaceTimeFn dx;
    SpaceTimeFn dy;
    SpaceTimeFn laplacian;
};

struct ManufacturedPair {
    ExactField u;
    ExactField c;
};

struct SourceTerms {
    SpaceTimeFn f_u;
    SpaceTimeFn f_c;
};

/// f_u = u_t - div(chi phi(u) grad(B g(u) - c)), f_c = beta c_t - lap c + alpha c - u.
/// Uses phi g' = 1, so div(phi grad(B g(u))) = B lap u.
inline SourceTerms mms_sources(const ExactField& u, const ExactField& c, const KSParams& p, MobilityModel m)
{
    SourceTerms s;
    s.f_u = [u, c, p, m](double x, double y, double t) {
        const double uv = u.value(x, y, t);
        detail::require_admissible(uv, m, "mms_sources");
        const double grad_dot = u.dx(x, y, t) * c.dx(x, y, t) + u.dy(x, y, t) * c.dy(x, y, t);
        const double div = p.B() * u.laplacian(x, y, t) - mobility_dphi(uv, m) * grad_dot
            - mobility_phi(uv, m) * c.laplacian(x, y, t);
        return u.dt(x, y, t) - p.chi * div;
    };
    s.f_c = [u, c, p](double x, double y, double t) {
        return p.beta * c.dt(x, y, t) - c.laplacian(x, y, t) + p.alpha * c.value(x, y, t) - u.value(x, y, t);
    };
    return s;
}

/// Exact pair of the 1D accuracy test on [0, 2pi]:
/// u = e^{-t}(0.3 sin x + 0.5), c = e^{-t}(sin x + 2).
inline ManufacturedPair smooth_solution_1d()
{
    ManufacturedPair mp;
    auto decay = [](double t) { return std::exp(-t); };
    mp.u.value = [=](double x, double, double t) { return decay(t) * (0.3 * std::sin(x) + 0.5); };
    mp.u.dt = [=](double x, double, double t) { return -decay(t) * (0.3 * std::sin(x) + 0.5); };
    mp.u.dx = [=](double x, double, double t) { return decay(t) * 0.3 * std::cos(x); };
    mp.u.dy = [](double, double, double) { return 0.0; };
    mp.u.laplacian = [=](double x, double, double t) { return -decay(t) * 0.3 * std::sin(x); };
    mp.c.value = [=](double x, double, double t) { return decay(t) * (std::sin(x) + 2.0); };
    mp.c.dt = [=](double x, double, double t) { return -decay(t) * (std::sin(x) + 2.0); };
    mp.c.dx = [=](double x, double, double t) { return decay(t) * std::cos(x); };
    mp.c.dy = [](double, double, double) { return 0.0; };
    mp.c.laplacian = [=](double x, double, double t) { return -decay(t) * std::sin(x); };
    return mp;
}

/// Exact pair of the 2D accuracy test on [0, 2pi]^2:
/// u = e^{-t}(0.3 sin x cos y + 0.5), c = e^{-t}(sin x cos y + 2).
inline ManufacturedPair smooth_solution_2d()
{
    ManufacturedPair mp;
    auto s = [](double x, double y) { return std::sin(x) * std::cos(y); };
    mp.u.value = [=](double x, double y, double t) { return std::exp(-t) * (0.3 * s(x, y) + 0.5); };
    mp.u.dt = [=](double x, double y, double t) { return -std::exp(-t) * (0.3 * s(x, y) + 0.5); };
    mp.u.dx = [](double x, double y, double t) { return std::exp(-t) * 0.3 * std::cos(x) * std::cos(y); };
    mp.u.dy = [](double x, double y, double t) { return -std::exp(-t) * 0.3 * std::sin(x) * std::sin(y); };
    mp.u.laplacian = [=](double x, double y, double t) { return -2.0 * std::exp(-t) * 0.3 * s(x, y); };
    mp.c.value = [=](double x, double y, double t) { return std::exp(-t) * (s(x, y) + 2.0); };
    mp.c.dt = [=](double x, double y, double t) { return -std::exp(-t) * (s(x, y) + 2.0); };
    mp.c.dx = [](double x, double y, double t) { return std::exp(-t) * std::cos(x) * std::cos(y); };
    mp.c.dy = [](double x, double y, double t) { return -std::exp(-t) * std::sin(x) * std::sin(y); };
    mp.c.laplacian = [=](double x, double y, double t) { return -2.0 * std::exp(-t) * s(x, y); };
    return mp;
}

} // namespace ksddg
