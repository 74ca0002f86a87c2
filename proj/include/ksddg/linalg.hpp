#pragma once

#include "mesh.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksddg {

using Vector = std::vector<double>;

struct SolveStats {
    int iterations = 0;
    double residual = 0.0; ///< true residual ||Ax - b||_2 recomputed at exit
    bool converged = false;
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a)
{
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

/// Block-CSR matrix with square dense blocks (row-major), one block row per element.
class BlockSparseMatrix {
public:
    BlockSparseMatrix() = default;

    /// Pattern from (row, col) block pairs; duplicates are merged.
    BlockSparseMatrix(int block_rows, int block_size, std::vector<std::pair<int, int>> pairs)
        : rows_(block_rows)
        , bs_(block_size)
    {
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        row_ptr_.assign(rows_ + 1, 0);
        for (const auto& [r, c] : pairs) {
            if (r < 0 || r >= rows_ || c < 0 || c >= rows_)
                throw std::out_of_range("BlockSparseMatrix: block index out of range");
            ++row_ptr_[r + 1];
        }
        for (int r = 0; r < rows_; ++r)
            row_ptr_[r + 1] += row_ptr_[r];
        col_.reserve(pairs.size());
        for (const auto& p : pairs)
            col_.push_back(p.second);
        diag_.assign(rows_, -1);
        for (int r = 0; r < rows_; ++r)
            for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                if (col_[k] == r)
                    diag_[r] = k;
        vals_.assign(col_.size() * bs_ * bs_, 0.0);
    }

    /// Self + edge-neighbour coupling of a mesh.
    static BlockSparseMatrix from_mesh(const Mesh& mesh, int block_size)
    {
        std::vector<std::pair<int, int>> pairs;
        for (int e = 0; e < mesh.num_elements(); ++e)
            pairs.emplace_back(e, e);
        for (const Edge& edge : mesh.edges()) {
            if (edge.boundary)
                continue;
            pairs.emplace_back(edge.first, edge.second);
            pairs.emplace_back(edge.second, edge.first);
        }
        return BlockSparseMatrix(mesh.num_elements(), block_size, std::move(pairs));
    }

    [[nodiscard]] int block_rows() const { return rows_; }
    [[nodiscard]] int block_size() const { return bs_; }
    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(rows_) * bs_; }
    [[nodiscard]] std::size_t num_blocks() const { return col_.size(); }
    [[nodiscard]] const std::vector<int>& row_ptr() const { return row_ptr_; }
    [[nodiscard]] const std::vector<int>& cols() const { return col_; }

    void set_zero() { std::fill(vals_.begin(), vals_.end(), 0.0); }

    /// Pointer to block (r, c); throws if (r, c) is not in the pattern.
    [[nodiscard]] double* block(int r, int c)
    {
        return vals_.data() + static_cast<std::size_t>(find(r, c)) * bs_ * bs_;
    }
    [[nodiscard]] const double* block(int r, int c) const
    {
        return vals_.data() + static_cast<std::size_t>(find(r, c)) * bs_ * bs_;
    }
    [[nodiscard]] const double* block_at(int k) const
    {
        return vals_.data() + static_cast<std::size_t>(k) * bs_ * bs_;
    }
    [[nodiscard]] double* block_at(int k) { return vals_.data() + static_cast<std::size_t>(k) * bs_ * bs_; }
    [[nodiscard]] const double* diagonal_block(int r) const { return block_at(diag_[r]); }
    [[nodiscard]] double* diagonal_block(int r) { return block_at(diag_[r]); }

    [[nodiscard]] double entry(std::size_t i, std::size_t j) const
    {
        const int r = static_cast<int>(i / bs_);
        const int c = static_cast<int>(j / bs_);
        for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_[k] == c)
                return block_at(k)[(i % bs_) * bs_ + (j % bs_)];
        return 0.0;
    }

    /// y = A x
    void apply(std::span<const double> x, std::span<double> y) const
    {
        if (x.size() != rows() || y.size() != rows())
            throw std::invalid_argument("BlockSparseMatrix::apply: dimension mismatch");
        const int bs = bs_;
        for (int r = 0; r < rows_; ++r) {
            double* yr = y.data() + static_cast<std::size_t>(r) * bs;
            for (int i = 0; i < bs; ++i)
                yr[i] = 0.0;
            for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                const double* B = block_at(k);
                const double* xc = x.data() + static_cast<std::size_t>(col_[k]) * bs;
                for (int i = 0; i < bs; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < bs; ++j)
                        s += B[i * bs + j] * xc[j];
                    yr[i] += s;
                }
            }
        }
    }

    /// Max |A_ij - A_ji|, for symmetry checks.
    [[nodiscard]] double asymmetry() const
    {
        double m = 0.0;
        for (int r = 0; r < rows_; ++r)
            for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                const int c = col_[k];
                const double* B = block_at(k);
                const double* Bt = block(c, r);
                for (int i = 0; i < bs_; ++i)
                    for (int j = 0; j < bs_; ++j)
                        m = std::max(m, std::abs(B[i * bs_ + j] - Bt[j * bs_ + i]));
            }
        return m;
    }

private:
    [[nodiscard]] int find(int r, int c) const
    {
        const auto first = col_.begin() + row_ptr_[r];
        const auto last = col_.begin() + row_ptr_[r + 1];
        const auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c)
            throw std::out_of_range("BlockSparseMatrix: block not in pattern");
        return static_cast<int>(it - col_.begin());
    }

    int rows_ = 0;
    int bs_ = 1;
    std::vector<int> row_ptr_;
    std::vector<int> col_;
    std::vector<int> diag_;
    std::vector<double> vals_;
};

inline Vector spmv(const BlockSparseMatrix& A, std::span<const double> x)
{
    Vector y(A.rows());
    A.apply(x, y);
    return y;
}

/// LU factorization (partial pivoting) of each diagonal block; applies the block inverse.
class BlockJacobi {
public:
    BlockJacobi() = default;

    explicit BlockJacobi(const BlockSparseMatrix& A)
    {
        reset(A.block_rows(), A.block_size());
        for (int r = 0; r < rows_; ++r)
            set_block(r, A.diagonal_block(r));
    }

    void reset(int rows, int bs)
    {
        rows_ = rows;
        bs_ = bs;
        lu_.assign(static_cast<std::size_t>(rows) * bs * bs, 0.0);
        piv_.assign(static_cast<std::size_t>(rows) * bs, 0);
    }

    /// Factor a dense bs x bs block for block row r.
    void set_block(int r, const double* block)
    {
        double* L = lu_.data() + static_cast<std::size_t>(r) * bs_ * bs_;
        int* p = piv_.data() + static_cast<std::size_t>(r) * bs_;
        std::copy(block, block + bs_ * bs_, L);
        for (int k = 0; k < bs_; ++k) {
            int best = k;
            for (int i = k + 1; i < bs_; ++i)
                if (std::abs(L[i * bs_ + k]) > std::abs(L[best * bs_ + k]))
                    best = i;
            p[k] = best;
            if (best != k)
                for (int j = 0; j < bs_; ++j)
                    std::swap(L[k * bs_ + j], L[best * bs_ + j]);
            const double piv = L[k * bs_ + k];
            if (piv == 0.0)
                throw std::runtime_error("BlockJacobi: singular diagonal block");
            for (int i = k + 1; i < bs_; ++i) {
                const double f = L[i * bs_ + k] / piv;
                L[i * bs_ + k] = f;
                for (int j = k + 1; j < bs_; ++j)
                    L[i * bs_ + j] -= f * L[k * bs_ + j];
            }
        }
    }

    /// y = D^{-1} x
    void apply(std::span<const double> x, std::span<double> y) const
    {
        for (int r = 0; r < rows_; ++r) {
            const double* L = lu_.data() + static_cast<std::size_t>(r) * bs_ * bs_;
            const int* p = piv_.data() + static_cast<std::size_t>(r) * bs_;
            double* yr = y.data() + static_cast<std::size_t>(r) * bs_;
            std::copy(x.data() + static_cast<std::size_t>(r) * bs_,
                x.data() + static_cast<std::size_t>(r + 1) * bs_, yr);
            for (int k = 0; k < bs_; ++k)
                if (p[k] != k)
                    std::swap(yr[k], yr[p[k]]);
            for (int i = 1; i < bs_; ++i)
                for (int j = 0; j < i; ++j)
                    yr[i] -= L[i * bs_ + j] * yr[j];
            for (int i = bs_ - 1; i >= 0; --i) {
                for (int j = i + 1; j < bs_; ++j)
                    yr[i] -= L[i * bs_ + j] * yr[j];
                yr[i] /= L[i * bs_ + i];
            }
        }
    }

private:
    int rows_ = 0;
    int bs_ = 1;
    std::vector<double> lu_;
    std::vector<int> piv_;
};

namespace detail {

inline void check_finite(double v, const char* who)
{
    if (!std::isfinite(v))
        throw std::runtime_error(std::string(who) + ": non-finite value encountered");
}

} // namespace detail

/// Preconditioned conjugate gradients. `A(x, y)` computes y = Ax, `P(r, z)` z = M^{-1} r.
/// x holds the initial guess on entry.
template <class Op, class Prec>
SolveStats cg_solve(Op&& A, Prec&& P, std::span<const double> b, std::span<double> x, double tol, int maxit)
{
    const std::size_t n = b.size();
    if (x.size() != n)
        throw std::invalid_argument("cg_solve: dimension mismatch");
    SolveStats st;
    const double bnorm = norm2(b);
    detail::check_finite(bnorm, "cg_solve");
    Vector r(n), z(n), p(n), Ap(n);
    A(std::span<const double>(x), std::span<double>(Ap));
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - Ap[i];
    const double target = tol * (bnorm > 0.0 ? bnorm : 1.0);
    double rnorm = norm2(r);
    if (rnorm <= target) {
        st.residual = rnorm;
        st.converged = true;
        return st;
    }
    P(std::span<const double>(r), std::span<double>(z));
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= maxit; ++it) {
        A(std::span<const double>(p), std::span<double>(Ap));
        const double pAp = dot(p, Ap);
        detail::check_finite(pAp, "cg_solve");
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        st.iterations = it;
        rnorm = norm2(r);
        detail::check_finite(rnorm, "cg_solve");
        if (rnorm <= target)
            break;
        P(std::span<const double>(r), std::span<double>(z));
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    A(std::span<const double>(x), std::span<double>(Ap));
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - Ap[i];
    st.residual = norm2(r);
    st.converged = st.residual <= target * (1.0 + 1e-6) || st.residual <= target + 1e-14 * bnorm;
    return st;
}

/// Restarted GMRES with right preconditioning, so the Arnoldi residual is the true one.
template <class Op, class Prec>
SolveStats gmres_solve(Op&& A, Prec&& P, std::span<const double> b, std::span<double> x, double tol,
    int maxit, int restart)
{
    const std::size_t n = b.size();
    if (x.size() != n)
        throw std::invalid_argument("gmres_solve: dimension mismatch");
    restart = std::max(1, restart);
    SolveStats st;
    const double bnorm = norm2(b);
    detail::check_finite(bnorm, "gmres_solve");
    const double target = tol * (bnorm > 0.0 ? bnorm : 1.0);

    Vector r(n), w(n), z(n);
    std::vector<Vector> V; // grown on demand; most solves need only a few vectors
    V.reserve(static_cast<std::size_t>(restart) + 1);
    auto basis = [&](int j) -> Vector& {
        while (static_cast<int>(V.size()) <= j)
            V.emplace_back(n);
        return V[static_cast<std::size_t>(j)];
    };
    std::vector<double> H(static_cast<std::size_t>(restart + 1) * restart, 0.0);
    std::vector<double> cs(restart), sn(restart), g(restart + 1);

    auto residual = [&]() {
        A(std::span<const double>(x), std::span<double>(w));
        for (std::size_t i = 0; i < n; ++i)
            r[i] = b[i] - w[i];
        return norm2(r);
    };

    double beta = residual();
    int total = 0;
    while (beta > target && total < maxit) {
        Vector& v0 = basis(0);
        for (std::size_t i = 0; i < n; ++i)
            v0[i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int j = 0;
        for (; j < restart && total < maxit; ++j) {
            ++total;
            P(std::span<const double>(V[j]), std::span<double>(z));
            A(std::span<const double>(z), std::span<double>(w));
            for (int i = 0; i <= j; ++i) {
                const double h = dot(w, V[i]);
                H[i * restart + j] = h;
                for (std::size_t m = 0; m < n; ++m)
                    w[m] -= h * V[i][m];
            }
            const double hn = norm2(w);
            detail::check_finite(hn, "gmres_solve");
            H[(j + 1) * restart + j] = hn;
            if (hn > 0.0) {
                Vector& vn = basis(j + 1);
                for (std::size_t m = 0; m < n; ++m)
                    vn[m] = w[m] / hn;
            }
            for (int i = 0; i < j; ++i) {
                const double a = H[i * restart + j];
                const double c = H[(i + 1) * restart + j];
                H[i * restart + j] = cs[i] * a + sn[i] * c;
                H[(i + 1) * restart + j] = -sn[i] * a + cs[i] * c;
            }
            const double a = H[j * restart + j];
            const double c = H[(j + 1) * restart + j];
            const double d = std::hypot(a, c);
            cs[j] = d > 0.0 ? a / d : 1.0;
            sn[j] = d > 0.0 ? c / d : 0.0;
            H[j * restart + j] = d;
            H[(j + 1) * restart + j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            if (std::abs(g[j + 1]) <= target || hn == 0.0) {
                ++j;
                break;
            }
        }
        // Back-substitute and update x += P^{-1} V y.
        std::vector<double> y(j, 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int m = i + 1; m < j; ++m)
                s -= H[i * restart + m] * y[m];
            y[i] = s / H[i * restart + i];
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (int i = 0; i < j; ++i)
            for (std::size_t m = 0; m < n; ++m)
                w[m] += y[i] * V[i][m];
        P(std::span<const double>(w), std::span<double>(z));
        for (std::size_t m = 0; m < n; ++m)
            x[m] += z[m];
        const double prev = beta;
        beta = residual();
        if (beta >= prev && j > 0 && beta > target) {
            // Stagnation: no progress over a whole cycle.
            break;
        }
    }
    st.iterations = total;
    st.residual = beta;
    st.converged = beta <= target * (1.0 + 1e-6);
    return st;
}

inline std::pair<Vector, SolveStats> cg_solve(const BlockSparseMatrix& A, std::span<const double> b, double tol, int maxit)
{
    const BlockJacobi P(A);
    Vector x(b.size(), 0.0);
    auto st = cg_solve([&](std::span<const double> v, std::span<double> out) { A.apply(v, out); },
        [&](std::span<const double> v, std::span<double> out) { P.apply(v, out); }, b, x, tol, maxit);
    return {std::move(x), st};
}

inline std::pair<Vector, SolveStats> gmres_solve(
    const BlockSparseMatrix& A, std::span<const double> b, double tol, int maxit, int restart = 30)
{
    const BlockJacobi P(A);
    Vector x(b.size(), 0.0);
    auto st = gmres_solve([&](std::span<const double> v, std::span<double> out) { A.apply(v, out); },
        [&](std::span<const double> v, std::span<double> out) { P.apply(v, out); }, b, x, tol, maxit, restart);
    return {std::move(x), st};
}

} // namespace ksddg
