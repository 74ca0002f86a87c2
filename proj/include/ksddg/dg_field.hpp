#pragma once

#include "mesh.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ksddg {

/// Q_k nodal space on a Mesh: Lagrange basis at the tensor Gauss–Lobatto points.
///
/// Local node (a, b) of an element has index a + (k+1) b (x-fastest). Face node lists
/// and normal-derivative functionals are precomputed once here.
class DGSpace {
public:
    DGSpace(std::shared_ptr<const Mesh> mesh, int degree)
        : mesh_(std::move(mesh))
        , degree_(degree)
    {
        if (!mesh_)
            throw std::invalid_argument("DGSpace: null mesh");
        if (degree < 1)
            throw std::invalid_argument("DGSpace: degree must be >= 1");
        n1_ = degree + 1;
        n_loc_ = dim() == 1 ? n1_ : n1_ * n1_;
        rule_ = gauss_lobatto_rule(n1_);
        basis_ = LagrangeBasis1D(rule_.nodes);

        jac_ = 1.0;
        for (int a = 0; a < dim(); ++a)
            jac_ *= 0.5 * mesh_->h(a);
        weights_.resize(n_loc_);
        for (int q = 0; q < n_loc_; ++q) {
            const auto ab = local_ab(q);
            weights_[q] = rule_.weights[ab[0]] * (dim() == 2 ? rule_.weights[ab[1]] : 1.0) * jac_;
        }
        build_faces();
    }

    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    [[nodiscard]] int dim() const { return mesh_->dim(); }
    [[nodiscard]] int degree() const { return degree_; }
    [[nodiscard]] int nodes_1d() const { return n1_; }
    [[nodiscard]] int nodes_per_element() const { return n_loc_; }
    [[nodiscard]] int num_elements() const { return mesh_->num_elements(); }
    [[nodiscard]] int num_dofs() const { return n_loc_ * num_elements(); }
    [[nodiscard]] const GaussLobattoRule& rule() const { return rule_; }
    [[nodiscard]] const LagrangeBasis1D& basis() const { return basis_; }

    /// Quadrature weight (including the element Jacobian) of local node q.
    [[nodiscard]] double weight(int q) const { return weights_[q]; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

    [[nodiscard]] std::array<int, 2> local_ab(int q) const
    {
        return dim() == 1 ? std::array<int, 2>{q, 0} : std::array<int, 2>{q % n1_, q / n1_};
    }

    /// Physical coordinates of local node q in element e.
    [[nodiscard]] std::array<double, 2> node_coords(int e, int q) const
    {
        return reference_to_physical(e, {rule_.nodes[local_ab(q)[0]],
                                            dim() == 2 ? rule_.nodes[local_ab(q)[1]] : 0.0});
    }

    [[nodiscard]] std::array<double, 2> reference_to_physical(int e, std::array<double, 2> xi) const
    {
        const auto o = mesh_->element_origin(e);
        std::array<double, 2> x{o[0] + 0.5 * (xi[0] + 1.0) * mesh_->h(0), 0.0};
        if (dim() == 2)
            x[1] = o[1] + 0.5 * (xi[1] + 1.0) * mesh_->h(1);
        return x;
    }

    /// Sparse functional over local nodes: sum_i coeff_i * w[node_i].
    struct NodeFunctional {
        std::vector<int> nodes;
        std::vector<double> coeffs;

        [[nodiscard]] double apply(std::span<const double> w) const
        {
            double s = 0.0;
            for (std::size_t i = 0; i < nodes.size(); ++i)
                s += coeffs[i] * w[nodes[i]];
            return s;
        }
    };

    /// Trace data of one face point: the node on the face and the functionals giving
    /// the first and second derivative along +e_axis there.
    struct FacePoint {
        int node = 0;
        NodeFunctional d1;
        NodeFunctional d2;
    };

    /// Face points of the face normal to `axis` on side 0 (low) or 1 (high), ordered
    /// along the edge's tangential coordinate.
    [[nodiscard]] const std::vector<FacePoint>& face(int axis, int side) const
    {
        return faces_[axis][side];
    }

    /// Quadrature weights along an edge normal to `axis` (1 in 1D).
    [[nodiscard]] const std::vector<double>& edge_weights(int axis) const
    {
        return edge_weights_[axis];
    }

    /// Gradient of the element polynomial at local node q (physical units).
    [[nodiscard]] std::array<double, 2> nodal_gradient(std::span<const double> w, int q) const
    {
        const auto ab = local_ab(q);
        std::array<double, 2> g{0.0, 0.0};
        const double sx = 2.0 / mesh_->h(0);
        if (dim() == 1) {
            for (int i = 0; i < n1_; ++i)
                g[0] += basis_.diff(ab[0], i) * w[i];
            g[0] *= sx;
            return g;
        }
        const double sy = 2.0 / mesh_->h(1);
        for (int i = 0; i < n1_; ++i) {
            g[0] += basis_.diff(ab[0], i) * w[i + n1_ * ab[1]];
            g[1] += basis_.diff(ab[1], i) * w[ab[0] + n1_ * i];
        }
        g[0] *= sx;
        g[1] *= sy;
        return g;
    }

    /// Tensor Lagrange basis values at a reference point.
    [[nodiscard]] std::vector<double> basis_values(std::array<double, 2> xi) const
    {
        const auto lx = basis_.values(xi[0]);
        if (dim() == 1)
            return lx;
        const auto ly = basis_.values(xi[1]);
        std::vector<double> out(n_loc_);
        for (int b = 0; b < n1_; ++b)
            for (int a = 0; a < n1_; ++a)
                out[a + n1_ * b] = lx[a] * ly[b];
        return out;
    }

    /// Reference-coordinate gradients of the tensor basis at a reference point.
    [[nodiscard]] std::array<std::vector<double>, 2> basis_gradients(std::array<double, 2> xi) const
    {
        const auto lx = basis_.values(xi[0]);
        const auto dx = basis_.derivatives(xi[0]);
        if (dim() == 1)
            return {dx, {}};
        const auto ly = basis_.values(xi[1]);
        const auto dy = basis_.derivatives(xi[1]);
        std::array<std::vector<double>, 2> out{std::vector<double>(n_loc_), std::vector<double>(n_loc_)};
        for (int b = 0; b < n1_; ++b)
            for (int a = 0; a < n1_; ++a) {
                out[0][a + n1_ * b] = dx[a] * ly[b];
                out[1][a + n1_ * b] = lx[a] * dy[b];
            }
        return out;
    }

private:
    void build_faces()
    {
        for (int axis = 0; axis < dim(); ++axis) {
            const double scale = 2.0 / mesh_->h(axis);
            for (int side = 0; side < 2; ++side) {
                const int a_face = side == 0 ? 0 : n1_ - 1;
                const int ntan = dim() == 1 ? 1 : n1_;
                auto& pts = faces_[axis][side];
                pts.resize(ntan);
                for (int t = 0; t < ntan; ++t) {
                    FacePoint fp;
                    auto node_of = [&](int along) {
                        if (dim() == 1)
                            return along;
                        return axis == 0 ? along + n1_ * t : t + n1_ * along;
                    };
                    fp.node = node_of(a_face);
                    for (int i = 0; i < n1_; ++i) {
                        fp.d1.nodes.push_back(node_of(i));
                        fp.d1.coeffs.push_back(scale * basis_.diff(a_face, i));
                        fp.d2.nodes.push_back(node_of(i));
                        fp.d2.coeffs.push_back(scale * scale * basis_.diff2(a_face, i));
                    }
                    pts[t] = std::move(fp);
                }
            }
            if (dim() == 1) {
                edge_weights_[axis] = {1.0};
            } else {
                const double half = 0.5 * mesh_->h(1 - axis);
                edge_weights_[axis].resize(n1_);
                for (int t = 0; t < n1_; ++t)
                    edge_weights_[axis][t] = rule_.weights[t] * half;
            }
        }
    }

    std::shared_ptr<const Mesh> mesh_;
    int degree_ = 1;
    int n1_ = 2;
    int n_loc_ = 2;
    double jac_ = 1.0;
    GaussLobattoRule rule_;
    LagrangeBasis1D basis_;
    std::vector<double> weights_;
    std::array<std::array<std::vector<FacePoint>, 2>, 2> faces_;
    std::array<std::vector<double>, 2> edge_weights_;
};

inline std::shared_ptr<const DGSpace> make_space(const Mesh& mesh, int degree)
{
    return std::make_shared<const DGSpace>(std::make_shared<const Mesh>(mesh), degree);
}

/// Nodal values of a piecewise Q_k function, element-major.
class DGField {
public:
    DGField() = default;
    explicit DGField(std::shared_ptr<const DGSpace> space, double value = 0.0)
        : space_(std::move(space))
        , values_(space_->num_dofs(), value)
    {
    }

    [[nodiscard]] const DGSpace& space() const { return *space_; }
    [[nodiscard]] const std::shared_ptr<const DGSpace>& space_ptr() const { return space_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    [[nodiscard]] std::vector<double>& values() { return values_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }

    [[nodiscard]] std::span<double> element(int e)
    {
        const int n = space_->nodes_per_element();
        return {values_.data() + static_cast<std::size_t>(e) * n, static_cast<std::size_t>(n)};
    }
    [[nodiscard]] std::span<const double> element(int e) const
    {
        const int n = space_->nodes_per_element();
        return {values_.data() + static_cast<std::size_t>(e) * n, static_cast<std::size_t>(n)};
    }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] bool same_space(const DGField& other) const
    {
        if (space_ == other.space_)
            return true;
        const auto& a = *space_;
        const auto& b = *other.space_;
        return a.degree() == b.degree() && a.dim() == b.dim()
            && a.mesh().count(0) == b.mesh().count(0) && a.mesh().count(1) == b.mesh().count(1)
            && a.mesh().boundary() == b.mesh().boundary();
    }

private:
    std::shared_ptr<const DGSpace> space_;
    std::vector<double> values_;
};

/// Gauss–Lobatto collocation interpolant of f(x, y) (y is 0 in 1D).
template <class F>
DGField interpolate(F&& f, std::shared_ptr<const DGSpace> space)
{
    DGField out(space);
    const int n = space->nodes_per_element();
    for (int e = 0; e < space->num_elements(); ++e) {
        auto w = out.element(e);
        for (int q = 0; q < n; ++q) {
            const auto x = space->node_coords(e, q);
            w[q] = f(x[0], x[1]);
        }
    }
    return out;
}

inline double evaluate(const DGField& field, int element, std::array<double, 2> xi)
{
    const auto& sp = field.space();
    if (element < 0 || element >= sp.num_elements())
        throw std::out_of_range("evaluate: invalid element");
    constexpr double tol = 1e-14;
    for (int a = 0; a < sp.dim(); ++a)
        if (xi[a] < -1.0 - tol || xi[a] > 1.0 + tol)
            throw std::domain_error("evaluate: point outside the reference element");
    const auto phi = sp.basis_values(xi);
    const auto w = field.element(element);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
        s += phi[i] * w[i];
    return s;
}

inline double evaluate(const DGField& field, int element, double xi)
{
    return evaluate(field, element, std::array<double, 2>{xi, 0.0});
}

/// Values, normal derivatives and second normal derivatives on both sides of an edge,
/// one entry per edge quadrature point. Index 0 is the `first` element, 1 the `second`.
/// Derivatives are taken along the edge normal (first -> second, or outward on the boundary).
struct EdgeTrace {
    bool boundary = false;
    double h_e = 0.0;
    std::vector<double> weights;
    std::array<std::vector<double>, 2> value;
    std::array<std::vector<double>, 2> dn;
    std::array<std::vector<double>, 2> d2n;

    [[nodiscard]] std::size_t size() const { return weights.size(); }
    [[nodiscard]] double jump(std::size_t s) const { return value[1][s] - value[0][s]; }
    [[nodiscard]] double average(std::size_t s) const { return 0.5 * (value[0][s] + value[1][s]); }
    [[nodiscard]] double dn_average(std::size_t s) const { return 0.5 * (dn[0][s] + dn[1][s]); }
    [[nodiscard]] double dn_jump(std::size_t s) const { return dn[1][s] - dn[0][s]; }
    [[nodiscard]] double d2n_jump(std::size_t s) const { return d2n[1][s] - d2n[0][s]; }
};

inline EdgeTrace edge_trace(const DGField& field, int edge_id)
{
    const auto& sp = field.space();
    const auto& mesh = sp.mesh();
    if (edge_id < 0 || edge_id >= mesh.num_edges())
        throw std::out_of_range("edge_trace: invalid edge id");
    const Edge& edge = mesh.edges()[edge_id];

    EdgeTrace tr;
    tr.boundary = edge.boundary;
    tr.h_e = edge.h_e;
    tr.weights = sp.edge_weights(edge.axis);
    const std::size_t ns = tr.weights.size();

    auto fill = [&](int slot, int element, int side, double sign) {
        const auto w = field.element(element);
        const auto& pts = sp.face(edge.axis, side);
        tr.value[slot].resize(ns);
        tr.dn[slot].resize(ns);
        tr.d2n[slot].resize(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            tr.value[slot][s] = w[pts[s].node];
            tr.dn[slot][s] = sign * pts[s].d1.apply(w);
            tr.d2n[slot][s] = pts[s].d2.apply(w);
        }
    };

    if (edge.boundary) {
        fill(0, edge.first, edge.normal_sign > 0 ? 1 : 0, edge.normal_sign);
    } else {
        fill(0, edge.first, 1, 1.0);
        fill(1, edge.second, 0, 1.0);
    }
    return tr;
}

inline double cell_average(const DGField& field, int element)
{
    const auto& sp = field.space();
    const auto w = field.element(element);
    double s = 0.0;
    for (int q = 0; q < sp.nodes_per_element(); ++q)
        s += sp.weight(q) * w[q];
    return s / sp.mesh().element_measure();
}

inline std::pair<double, double> nodal_extrema(const DGField& field)
{
    const auto [lo, hi] = std::minmax_element(field.values().begin(), field.values().end());
    return {*lo, *hi};
}

/// Integral of the field with the nodal quadrature.
inline double integral(const DGField& field)
{
    const auto& sp = field.space();
    const int n = sp.nodes_per_element();
    double s = 0.0;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto w = field.element(e);
        for (int q = 0; q < n; ++q)
            s += sp.weight(q) * w[q];
    }
    return s;
}

namespace detail {

// Tabulated basis values/gradients at a tensor Gauss–Legendre rule, for over-integration.
struct OverIntegration {
    std::vector<std::array<double, 2>> points;
    std::vector<double> ref_weights;
    std::vector<std::vector<double>> phi;
    std::vector<std::array<std::vector<double>, 2>> grad;

    OverIntegration(const DGSpace& sp, int npts)
    {
        const auto g = gauss_legendre_rule(npts);
        const int ny = sp.dim() == 2 ? npts : 1;
        for (int b = 0; b < ny; ++b)
            for (int a = 0; a < npts; ++a) {
                std::array<double, 2> xi{g.nodes[a], sp.dim() == 2 ? g.nodes[b] : 0.0};
                points.push_back(xi);
                ref_weights.push_back(g.weights[a] * (sp.dim() == 2 ? g.weights[b] : 1.0));
                phi.push_back(sp.basis_values(xi));
                grad.push_back(sp.basis_gradients(xi));
            }
    }
};

} // namespace detail

/// L2 norm of (field - f_exact) using a (k+3)-point Gauss rule per axis.
template <class F>
double l2_error(const DGField& field, F&& f_exact)
{
    const auto& sp = field.space();
    const detail::OverIntegration oi(sp, sp.degree() + 3);
    double jac = sp.mesh().element_measure() / (sp.dim() == 1 ? 2.0 : 4.0);
    double sum = 0.0;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto w = field.element(e);
        for (std::size_t p = 0; p < oi.points.size(); ++p) {
            double v = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i)
                v += oi.phi[p][i] * w[i];
            const auto x = sp.reference_to_physical(e, oi.points[p]);
            const double d = v - f_exact(x[0], x[1]);
            sum += oi.ref_weights[p] * jac * d * d;
        }
    }
    return std::sqrt(sum);
}

/// Broken H1 seminorm plus interior-edge jump terms: (sum |grad v|^2 + sum_e (1/h_e)[v]^2)^(1/2).
inline double energy_norm(const DGField& field)
{
    const auto& sp = field.space();
    const auto& mesh = sp.mesh();
    const detail::OverIntegration oi(sp, sp.degree() + 3);
    const double jac = mesh.element_measure() / (sp.dim() == 1 ? 2.0 : 4.0);
    std::array<double, 2> scale{2.0 / mesh.h(0), sp.dim() == 2 ? 2.0 / mesh.h(1) : 0.0};

    double sum = 0.0;
    for (int e = 0; e < sp.num_elements(); ++e) {
        const auto w = field.element(e);
        for (std::size_t p = 0; p < oi.points.size(); ++p) {
            for (int a = 0; a < sp.dim(); ++a) {
                double g = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i)
                    g += oi.grad[p][a][i] * w[i];
                g *= scale[a];
                sum += oi.ref_weights[p] * jac * g * g;
            }
        }
    }

    // Jumps are polynomials of degree k along the edge; integrate them with k+3 Gauss points.
    const auto g = gauss_legendre_rule(sp.degree() + 3);
    for (const Edge& edge : mesh.edges()) {
        if (edge.boundary)
            continue;
        const auto w1 = field.element(edge.first);
        const auto w2 = field.element(edge.second);
        if (sp.dim() == 1) {
            const double jmp = w2[0] - w1[sp.nodes_1d() - 1];
            sum += jmp * jmp / edge.h_e;
            continue;
        }
        const double half = 0.5 * edge.h_e;
        for (std::size_t s = 0; s < g.size(); ++s) {
            // Trace points in reference coordinates of each side.
            std::array<double, 2> xi1{}, xi2{};
            xi1[edge.axis] = 1.0;
            xi2[edge.axis] = -1.0;
            xi1[1 - edge.axis] = g.nodes[s];
            xi2[1 - edge.axis] = g.nodes[s];
            const auto p1 = sp.basis_values(xi1);
            const auto p2 = sp.basis_values(xi2);
            double v1 = 0.0, v2 = 0.0;
            for (std::size_t i = 0; i < p1.size(); ++i) {
                v1 += p1[i] * w1[i];
                v2 += p2[i] * w2[i];
            }
            const double jmp = v2 - v1;
            sum += g.weights[s] * half * jmp * jmp / edge.h_e;
        }
    }
    return std::sqrt(sum);
}

} // namespace ksddg
