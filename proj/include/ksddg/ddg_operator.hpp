#pragma once

#include "dg_field.hpp"
#include "linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace ksddg {

/// Coefficients of the DDG normal-derivative flux
///   beta0 [w]/h_e + {d_n w} + beta1 h_e [d_n^2 w].
struct FluxParams {
    double beta0 = 7.0 / 6.0;
    double beta1 = 0.0;

    void validate() const
    {
        if (!(beta0 > 0.0))
            throw std::invalid_argument("FluxParams: beta0 must be positive");
        if (beta1 < 0.0)
            throw std::invalid_argument("FluxParams: beta1 must be non-negative");
    }

    /// (7/6, 0). Coercive for P1 only; see reproduction_flux for higher degrees.
    static FluxParams standard() { return {7.0 / 6.0, 0.0}; }
    /// beta1 = 1/(2k(k+1)), the choice for which optimal rates are proved.
    static FluxParams optimal(int k, double beta0 = 7.0 / 6.0)
    {
        return {beta0, 1.0 / (2.0 * k * (k + 1.0))};
    }
};

/// Numerical flux at every point of an interior edge trace.
inline std::vector<double> numerical_normal_derivative(const EdgeTrace& tr, const FluxParams& flux)
{
    if (tr.boundary)
        throw std::invalid_argument("numerical_normal_derivative: boundary edge has no flux");
    std::vector<double> out(tr.size());
    for (std::size_t s = 0; s < tr.size(); ++s)
        out[s] = flux.beta0 * tr.jump(s) / tr.h_e + tr.dn_average(s) + flux.beta1 * tr.h_e * tr.d2n_jump(s);
    return out;
}

/// Assembled form a_phi(w, v) = sum_tau [ -(phi grad w, grad v)_tau
///                                     + (phi, flux(w) v + (w - {w}) d_n v)_{d tau} ].
///
/// Row i of the matrix is the test function psi_i, so (A w)_i = a_phi(w, psi_i). All
/// integrals use the Gauss–Lobatto nodal rule; phi is given by its nodal values and its
/// edge value is the average of the two traces. Boundary edges contribute nothing,
/// which imposes a zero normal flux.
class DDGOperator {
public:
    DDGOperator(std::shared_ptr<const DGSpace> space, FluxParams flux)
        : space_(std::move(space))
        , flux_(flux)
        , matrix_(BlockSparseMatrix::from_mesh(space_->mesh(), space_->nodes_per_element()))
    {
        flux_.validate();
        build_edge_stencils();
        std::vector<double> ones(space_->num_dofs(), 1.0);
        assemble(ones);
    }

    DDGOperator(std::shared_ptr<const DGSpace> space, FluxParams flux, std::span<const double> phi_nodal)
        : DDGOperator(std::move(space), flux)
    {
        assemble(phi_nodal);
    }

    [[nodiscard]] const DGSpace& space() const { return *space_; }
    [[nodiscard]] const FluxParams& flux() const { return flux_; }
    [[nodiscard]] const BlockSparseMatrix& matrix() const { return matrix_; }

    /// Re-assemble for a new nodal coefficient field; the sparsity pattern is reused.
    void assemble(std::span<const double> phi)
    {
        const DGSpace& sp = *space_;
        if (phi.size() != static_cast<std::size_t>(sp.num_dofs()))
            throw std::invalid_argument("DDGOperator::assemble: coefficient size mismatch");
        matrix_.set_zero();
        const int n = sp.nodes_per_element();
        const int n1 = sp.nodes_1d();
        const int dim = sp.dim();
        const auto& basis = sp.basis();
        const auto& mesh = sp.mesh();
        std::array<double, 2> scale{2.0 / mesh.h(0), dim == 2 ? 2.0 / mesh.h(1) : 0.0};

        // Volume: -sum_q W_q phi_q grad psi_i(x_q) . grad psi_j(x_q)
        std::vector<int> idx(n1);
        std::vector<double> g(n1);
        for (int e = 0; e < sp.num_elements(); ++e) {
            double* B = matrix_.diagonal_block(e);
            const double* ph = phi.data() + static_cast<std::size_t>(e) * n;
            for (int q = 0; q < n; ++q) {
                const double c = sp.weight(q) * ph[q];
                const auto ab = sp.local_ab(q);
                for (int a = 0; a < dim; ++a) {
                    for (int i = 0; i < n1; ++i) {
                        g[i] = scale[a] * basis.diff(ab[a], i);
                        if (dim == 1)
                            idx[i] = i;
                        else
                            idx[i] = a == 0 ? i + n1 * ab[1] : ab[0] + n1 * i;
                    }
                    for (int i = 0; i < n1; ++i)
                        for (int j = 0; j < n1; ++j)
                            B[idx[i] * n + idx[j]] -= c * g[i] * g[j];
                }
            }
        }

        // Edges: -sum_s w_s phi_s ( J(v) F(w) + D(v) J(w) ) with
        // J = [.] jump, D = {d_n .}, F = beta0/h_e J + D + beta1 h_e [d_n^2 .].
        for (const EdgeStencil& st : edge_stencils_) {
            double* blocks[2][2];
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    blocks[r][c] = matrix_.block(st.element[r], st.element[c]);
            const double* ph0 = phi.data() + static_cast<std::size_t>(st.element[0]) * n;
            const double* ph1 = phi.data() + static_cast<std::size_t>(st.element[1]) * n;
            for (const PointStencil& p : st.points) {
                const double phi_s = 0.5 * (ph0[p.jump[0].node] + ph1[p.jump[1].node]);
                const double c = -p.weight * phi_s;
                for (const auto& t : p.jump)
                    for (const auto& f : p.flux)
                        blocks[t.side][f.side][t.node * n + f.node] += c * t.coeff * f.coeff;
                for (const auto& t : p.dn_avg)
                    for (const auto& f : p.jump)
                        blocks[t.side][f.side][t.node * n + f.node] += c * t.coeff * f.coeff;
            }
        }
    }

    /// Residual vector r_i = a_phi(w, psi_i).
    [[nodiscard]] Vector apply(std::span<const double> w) const { return spmv(matrix_, w); }
    void apply(std::span<const double> w, std::span<double> out) const { matrix_.apply(w, out); }

private:
    struct Term {
        int side;
        int node;
        double coeff;
    };
    struct PointStencil {
        double weight = 0.0;
        std::vector<Term> jump;   // [v] as a functional of the two element vectors
        std::vector<Term> dn_avg; // {d_n v}
        std::vector<Term> flux;   // numerical flux of v
    };
    struct EdgeStencil {
        std::array<int, 2> element{};
        std::vector<PointStencil> points;
    };

    void build_edge_stencils()
    {
        const DGSpace& sp = *space_;
        for (const Edge& edge : sp.mesh().edges()) {
            if (edge.boundary)
                continue;
            EdgeStencil st;
            st.element = {edge.first, edge.second};
            const auto& f0 = sp.face(edge.axis, 1);
            const auto& f1 = sp.face(edge.axis, 0);
            const auto& wts = sp.edge_weights(edge.axis);
            for (std::size_t s = 0; s < wts.size(); ++s) {
                PointStencil p;
                p.weight = wts[s];
                p.jump = {{0, f0[s].node, -1.0}, {1, f1[s].node, 1.0}};
                for (std::size_t i = 0; i < f0[s].d1.nodes.size(); ++i) {
                    p.dn_avg.push_back({0, f0[s].d1.nodes[i], 0.5 * f0[s].d1.coeffs[i]});
                    p.dn_avg.push_back({1, f1[s].d1.nodes[i], 0.5 * f1[s].d1.coeffs[i]});
                }
                const double b0 = flux_.beta0 / edge.h_e;
                const double b1 = flux_.beta1 * edge.h_e;
                p.flux.push_back({0, f0[s].node, -b0});
                p.flux.push_back({1, f1[s].node, b0});
                for (const auto& t : p.dn_avg)
                    p.flux.push_back(t);
                if (b1 != 0.0)
                    for (std::size_t i = 0; i < f0[s].d2.nodes.size(); ++i) {
                        p.flux.push_back({0, f0[s].d2.nodes[i], -b1 * f0[s].d2.coeffs[i]});
                        p.flux.push_back({1, f1[s].d2.nodes[i], b1 * f1[s].d2.coeffs[i]});
                    }
                st.points.push_back(std::move(p));
            }
            edge_stencils_.push_back(std::move(st));
        }
    }

    std::shared_ptr<const DGSpace> space_;
    FluxParams flux_;
    BlockSparseMatrix matrix_;
    std::vector<EdgeStencil> edge_stencils_;
};

/// a_phi(w, v) for two fields on the operator's space.
inline double apply_a_phi(const DDGOperator& op, const DGField& w, const DGField& v)
{
    if (!w.same_space(v) || w.size() != static_cast<std::size_t>(op.space().num_dofs()))
        throw std::invalid_argument("apply_a_phi: mismatched mesh or degree");
    const auto r = op.apply(w.values());
    return dot(r, v.values());
}

/// r_i = a_phi(w, psi_i) over the nodal test basis.
inline Vector apply_a_phi(const DDGOperator& op, const DGField& w)
{
    if (w.size() != static_cast<std::size_t>(op.space().num_dofs()))
        throw std::invalid_argument("apply_a_phi: mismatched mesh or degree");
    return op.apply(w.values());
}

/// Gamma(beta1) = sup_{v in P_{k-1}} 2 (v(1) - 2 beta1 v'(1))^2 / int_{-1}^{1} v^2,
/// the largest eigenvalue of (2 l l^T) a = lambda G a in the monomial basis.
inline double gamma_of_beta1(int k, double beta1)
{
    if (k < 1)
        throw std::invalid_argument("gamma_of_beta1: degree must be >= 1");
    const int m = k;
    Eigen::MatrixXd G(m, m);
    Eigen::VectorXd l(m);
    for (int i = 0; i < m; ++i) {
        l(i) = 1.0 - 2.0 * beta1 * i; // xi^i at 1 is 1, its derivative is i
        for (int j = 0; j < m; ++j)
            G(i, j) = (i + j) % 2 == 0 ? 2.0 / (i + j + 1.0) : 0.0;
    }
    const Eigen::MatrixXd Nm = 2.0 * l * l.transpose();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Nm, G);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("gamma_of_beta1: eigen solver failed");
    return es.eigenvalues().maxCoeff();
}

struct Admissibility {
    bool admissible = false;
    double margin = 0.0; ///< phi0*beta0 - phi1*Gamma(beta1)
    double gamma = 0.0;
    double required_beta0 = 0.0; ///< smallest admissible beta0 for these bounds
};

/// Coercivity condition phi0 beta0 >= phi1 Gamma(beta1) for 0 <= phi0 <= phi <= phi1.
inline Admissibility check_admissible(const FluxParams& flux, double phi0, double phi1, int k)
{
    if (phi0 < 0.0 || phi0 > phi1)
        throw std::invalid_argument("check_admissible: need 0 <= phi0 <= phi1");
    Admissibility a;
    a.gamma = gamma_of_beta1(k, flux.beta1);
    a.margin = phi0 * flux.beta0 - phi1 * a.gamma;
    // phi0 = 0 degenerates: the inequality cannot carry any coercivity.
    a.admissible = phi0 > 0.0 && a.margin >= 0.0;
    a.required_beta0 = phi0 > 0.0 ? phi1 * a.gamma / phi0 : std::numeric_limits<double>::infinity();
    return a;
}

/// Default flux per degree: (max(7/6, Gamma(0)), 0), i.e. (7/6,0) for P1 and (4,0) for P2.
/// The smallest beta0 that keeps a_1 coercive with the sufficient bound beta0 >= Gamma(0).
inline FluxParams reproduction_flux(int k)
{
    return {std::max(7.0 / 6.0, gamma_of_beta1(k, 0.0)), 0.0};
}

} // namespace ksddg
