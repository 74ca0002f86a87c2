#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksddg {

enum class BoundaryKind { Periodic, ZeroFlux };

inline std::string to_string(BoundaryKind bc)
{
    return bc == BoundaryKind::Periodic ? "periodic" : "zeroflux";
}

/// Axis-aligned interval (dim 1) or rectangle (dim 2).
struct Domain {
    int dim = 1;
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{1.0, 1.0};

    [[nodiscard]] double length(int axis) const { return upper[axis] - lower[axis]; }
    [[nodiscard]] double measure() const
    {
        return dim == 1 ? length(0) : length(0) * length(1);
    }
};

inline Domain interval(double lo, double hi) { return Domain{1, {lo, 0.0}, {hi, 0.0}}; }
inline Domain rectangle(double xlo, double xhi, double ylo, double yhi)
{
    return Domain{2, {xlo, ylo}, {xhi, yhi}};
}

inline constexpr int kBoundary = -1;

/// One mesh edge (a point in 1D, a segment in 2D).
///
/// Interior edges: `first` is the element on the low side along `axis`, `second` the
/// element on the high side, and the normal is +e_axis (first -> second). Periodic
/// wrap-around edges follow the same rule, so `first` is the last element of the row.
/// Boundary edges: `first` is the interior element, `second == kBoundary`, and
/// `normal_sign` gives the outward direction.
struct Edge {
    int first = 0;
    int second = kBoundary;
    int axis = 0;
    double normal_sign = 1.0;
    double h_e = 0.0;
    bool boundary = false;

    [[nodiscard]] std::array<double, 2> normal() const
    {
        std::array<double, 2> n{0.0, 0.0};
        n[axis] = normal_sign;
        return n;
    }
};

struct EdgeNeighbors {
    int first;
    int second; // kBoundary for boundary edges
    std::array<double, 2> normal;
};

/// Uniform tensor-product partition. Elements are indexed x-fastest.
class Mesh {
public:
    Mesh(Domain domain, std::array<int, 2> counts, BoundaryKind bc)
        : domain_(domain)
        , counts_(counts)
        , bc_(bc)
    {
        if (domain.dim != 1 && domain.dim != 2)
            throw std::invalid_argument("Mesh: dimension must be 1 or 2");
        if (domain.dim == 1)
            counts_[1] = 1;
        for (int a = 0; a < domain.dim; ++a) {
            if (counts_[a] < 1)
                throw std::invalid_argument("Mesh: element count must be positive");
            if (!(domain.upper[a] > domain.lower[a]))
                throw std::invalid_argument("Mesh: degenerate domain");
            h_[a] = domain.length(a) / counts_[a];
        }
        if (domain.dim == 1)
            h_[1] = 1.0;
        build_edges();
    }

    [[nodiscard]] int dim() const { return domain_.dim; }
    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] BoundaryKind boundary() const { return bc_; }
    [[nodiscard]] int count(int axis) const { return counts_[axis]; }
    [[nodiscard]] double h(int axis) const { return h_[axis]; }
    [[nodiscard]] double h_min() const { return dim() == 1 ? h_[0] : std::min(h_[0], h_[1]); }
    [[nodiscard]] int num_elements() const { return counts_[0] * counts_[1]; }
    [[nodiscard]] double element_measure() const { return dim() == 1 ? h_[0] : h_[0] * h_[1]; }
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
    [[nodiscard]] int num_edges() const { return static_cast<int>(edges_.size()); }

    [[nodiscard]] int element_index(int i, int j = 0) const { return i + counts_[0] * j; }
    [[nodiscard]] std::array<int, 2> element_ij(int e) const
    {
        return {e % counts_[0], e / counts_[0]};
    }
    /// Lower-left corner of element e.
    [[nodiscard]] std::array<double, 2> element_origin(int e) const
    {
        const auto ij = element_ij(e);
        return {domain_.lower[0] + ij[0] * h_[0],
            dim() == 2 ? domain_.lower[1] + ij[1] * h_[1] : 0.0};
    }

    [[nodiscard]] EdgeNeighbors edge_neighbors(int edge_id) const
    {
        if (edge_id < 0 || edge_id >= num_edges())
            throw std::out_of_range("Mesh::edge_neighbors: invalid edge id");
        const Edge& e = edges_[edge_id];
        return {e.first, e.second, e.normal()};
    }

    /// Ids of the edges touching element e (interior and boundary).
    [[nodiscard]] std::vector<int> element_edges(int e) const
    {
        std::vector<int> out;
        for (int id = 0; id < num_edges(); ++id)
            if (edges_[id].first == e || edges_[id].second == e)
                out.push_back(id);
        return out;
    }

private:
    void build_edges()
    {
        const bool periodic = bc_ == BoundaryKind::Periodic;
        const int nx = counts_[0];
        const int ny = counts_[1];
        // Edges normal to x: in 1D these are points; in 2D segments of length h_y.
        const double hex = dim() == 1 ? h_[0] : h_[1];
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                Edge e;
                e.axis = 0;
                e.h_e = hex;
                if (i == 0 || i == nx) {
                    if (periodic) {
                        if (i == nx)
                            continue; // the wrap edge is stored once, at x = lower
                        e.first = element_index(nx - 1, j);
                        e.second = element_index(0, j);
                    } else {
                        e.boundary = true;
                        e.first = element_index(i == 0 ? 0 : nx - 1, j);
                        e.second = kBoundary;
                        e.normal_sign = i == 0 ? -1.0 : 1.0;
                    }
                } else {
                    e.first = element_index(i - 1, j);
                    e.second = element_index(i, j);
                }
                edges_.push_back(e);
            }
        }
        if (dim() == 1)
            return;
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Edge e;
                e.axis = 1;
                e.h_e = h_[0];
                if (j == 0 || j == ny) {
                    if (periodic) {
                        if (j == ny)
                            continue;
                        e.first = element_index(i, ny - 1);
                        e.second = element_index(i, 0);
                    } else {
                        e.boundary = true;
                        e.first = element_index(i, j == 0 ? 0 : ny - 1);
                        e.second = kBoundary;
                        e.normal_sign = j == 0 ? -1.0 : 1.0;
                    }
                } else {
                    e.first = element_index(i, j - 1);
                    e.second = element_index(i, j);
                }
                edges_.push_back(e);
            }
        }
    }

    Domain domain_;
    std::array<int, 2> counts_;
    BoundaryKind bc_;
    std::array<double, 2> h_{1.0, 1.0};
    std::vector<Edge> edges_;
};

inline Mesh build_mesh(const Domain& domain, int n, BoundaryKind bc)
{
    return Mesh(domain, {n, domain.dim == 2 ? n : 1}, bc);
}

inline Mesh build_mesh(const Domain& domain, std::array<int, 2> counts, BoundaryKind bc)
{
    return Mesh(domain, counts, bc);
}

} // namespace ksddg
