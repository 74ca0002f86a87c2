#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ksddg {

/// Nodes and weights of a one-dimensional rule on the reference interval [-1,1].
struct QuadratureRule1D {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

/// Gauss–Lobatto points include both endpoints; n points integrate degree <= 2n-3 exactly.
using GaussLobattoRule = QuadratureRule1D;

namespace detail {

// Legendre polynomial P_n and its derivative at x via the three-term recurrence.
inline void legendre(int n, double x, double& p, double& dp)
{
    double p0 = 1.0;
    double p1 = x;
    if (n == 0) {
        p = 1.0;
        dp = 0.0;
        return;
    }
    for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    p = p1;
    // (1-x^2) P_n' = n (P_{n-1} - x P_n)
    dp = (std::abs(1.0 - x * x) < 1e-300) ? 0.0 : n * (p0 - x * p1) / (1.0 - x * x);
}

} // namespace detail

inline GaussLobattoRule gauss_lobatto_rule(int n)
{
    if (n < 2)
        throw std::invalid_argument("gauss_lobatto_rule: need at least 2 points");

    GaussLobattoRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const int N = n - 1; // interior nodes are the roots of P_N'
    rule.nodes.front() = -1.0;
    rule.nodes.back() = 1.0;

    for (int i = 1; i < N; ++i) {
        // Chebyshev–Gauss–Lobatto initial guess, then Newton on P_N'.
        double x = -std::cos(std::numbers::pi * i / N);
        for (int it = 0; it < 100; ++it) {
            double p, dp;
            detail::legendre(N, x, p, dp);
            // P_N'' from the Legendre ODE: (1-x^2)P'' = 2xP' - N(N+1)P
            const double d2p = (2.0 * x * dp - N * (N + 1.0) * p) / (1.0 - x * x);
            const double dx = dp / d2p;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        rule.nodes[i] = x;
    }
    // Symmetrize to remove round-off drift.
    for (int i = 0; i < n / 2; ++i) {
        const double a = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        rule.nodes[i] = -a;
        rule.nodes[n - 1 - i] = a;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;

    for (int i = 0; i < n; ++i) {
        double p, dp;
        detail::legendre(N, rule.nodes[i], p, dp);
        rule.weights[i] = 2.0 / (N * (N + 1.0) * p * p);
    }
    return rule;
}

/// Gauss–Legendre rule with n interior points, exact for degree <= 2n-1.
inline QuadratureRule1D gauss_legendre_rule(int n)
{
    if (n < 1)
        throw std::invalid_argument("gauss_legendre_rule: need at least 1 point");

    QuadratureRule1D rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            detail::legendre(n, x, p, dp);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        detail::legendre(n, x, p, dp);
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

/// Lagrange basis on a fixed set of 1D nodes, with nodal differentiation matrices.
///
/// `diff(q, i)` is l_i'(x_q); `diff2` is its square, which is exact on P_k.
class LagrangeBasis1D {
public:
    LagrangeBasis1D() = default;

    explicit LagrangeBasis1D(std::vector<double> nodes)
        : nodes_(std::move(nodes))
    {
        const std::size_t n = nodes_.size();
        bary_.assign(n, 1.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t m = 0; m < n; ++m)
                if (m != j)
                    bary_[j] /= (nodes_[j] - nodes_[m]);

        d1_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double diag = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j)
                    continue;
                const double v = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
                d1_[i * n + j] = v;
                diag -= v;
            }
            d1_[i * n + i] = diag;
        }
        d2_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t m = 0; m < n; ++m)
                    s += d1_[i * n + m] * d1_[m * n + j];
                d2_[i * n + j] = s;
            }
    }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
    [[nodiscard]] double diff(std::size_t q, std::size_t i) const { return d1_[q * size() + i]; }
    [[nodiscard]] double diff2(std::size_t q, std::size_t i) const { return d2_[q * size() + i]; }

    /// Values l_i(x) of every basis function at a reference point.
    [[nodiscard]] std::vector<double> values(double x) const
    {
        const std::size_t n = size();
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (x == nodes_[i]) {
                out[i] = 1.0;
                return out;
            }
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = bary_[i] / (x - nodes_[i]);
            denom += out[i];
        }
        for (auto& v : out)
            v /= denom;
        return out;
    }

    /// Derivatives l_i'(x) at a reference point.
    [[nodiscard]] std::vector<double> derivatives(double x) const
    {
        const std::size_t n = size();
        const auto l = values(x);
        std::vector<double> out(n, 0.0);
        // p'(x) = sum_q l_q(x) (D p)_q, so dl_i/dx = sum_q l_q(x) D_{q i}.
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t i = 0; i < n; ++i)
                out[i] += l[q] * d1_[q * n + i];
        return out;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> bary_;
    std::vector<double> d1_;
    std::vector<double> d2_;
};

} // namespace ksddg
