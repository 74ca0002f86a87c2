#pragma once

#include "ddg_operator.hpp"
#include "dg_field.hpp"
#include "ks_model.hpp"
#include "limiters.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksddg {

/// Raised when a linear or Newton solve fails; carries the step and the Newton log.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, long step, std::vector<double> newton_log = {})
        : std::runtime_error(what)
        , step_(step)
        , newton_log_(std::move(newton_log))
    {
    }
    [[nodiscard]] long step() const { return step_; }
    [[nodiscard]] const std::vector<double>& newton_log() const { return newton_log_; }

private:
    long step_;
    std::vector<double> newton_log_;
};

enum class DtRule { Fixed, MeshScaled };

struct StepConfig {
    DtRule dt_rule = DtRule::MeshScaled;
    double dt = 0.0;            ///< used when dt_rule == Fixed
    double dt_factor = 0.01;    ///< h_t = dt_factor * h_min^2 when MeshScaled
    double newton_tol = 1e-10;  ///< on ||r||_2 / sqrt(#dofs)
    int newton_max_iter = 50;
    double damping = 0.95;      ///< fraction-to-boundary safeguard sigma
    bool limiter = true;
    bool cfl_check = true;
    double linear_tol = 1e-12;  ///< relative tolerance of the inner Krylov solves
    int linear_max_iter = 2000;
    int gmres_restart = 60;

    void validate() const
    {
        if (dt_rule == DtRule::Fixed && !(dt > 0.0))
            throw std::invalid_argument("StepConfig: fixed time step must be positive");
        if (dt_rule == DtRule::MeshScaled && !(dt_factor > 0.0))
            throw std::invalid_argument("StepConfig: dt factor must be positive");
        if (!(damping > 0.0 && damping < 1.0))
            throw std::invalid_argument("StepConfig: damping fraction must lie in (0,1)");
        if (!(newton_tol > 0.0) || newton_max_iter < 1)
            throw std::invalid_argument("StepConfig: invalid Newton controls");
    }

    [[nodiscard]] double time_step(const Mesh& mesh) const
    {
        return dt_rule == DtRule::Fixed ? dt : dt_factor * mesh.h_min() * mesh.h_min();
    }
};

struct SimulationState {
    double t = 0.0;
    DGField u;
    DGField c;
    long step = 0;
};

struct NewtonStats {
    int iterations = 0;
    double residual = 0.0;
    int damping_activations = 0; ///< iterations where some node took the guarded (entropy-variable) step
    int line_search_cuts = 0;    ///< iterations where backtracking shortened the step
    int linear_iterations = 0;
    bool converged = false;
    std::vector<double> history; ///< residual norm at every iterate
};

struct StepReport {
    double dt = 0.0;
    NewtonStats newton;
    SolveStats c_solve;
    LimiterReport u_limiter;
    LimiterReport c_limiter;
    double u_average_min = 0.0; ///< pre-limit cell averages of u
    double u_average_max = 0.0;
    double mass_before = 0.0;
    double mass_after = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double cfl_ratio = 0.0; ///< phi_0 beta h / h_t with phi_0 the smallest nodal mobility
};

struct DiagnosticsRecord {
    double t = 0.0;
    double mass_u = 0.0;
    double mass_c = 0.0;
    double energy = 0.0;
    double min_u = 0.0;
    double max_u = 0.0;
    double min_c = 0.0;
    double theta_min = 1.0;
    // Not written to the CSV.
    double u_average_min = 0.0;
    double u_average_max = 0.0;
    int limited_u = 0;
    int limited_c = 0;
    int elements = 0;
    int newton_iterations = 0;
};

/// Lower/upper admissible bound of the density for a mobility model.
inline std::pair<double, double> density_bounds(MobilityModel m)
{
    return {0.0, m == MobilityModel::Saturated ? 1.0 : std::numeric_limits<double>::infinity()};
}

/// Decoupled first-order step: implicit linear c-step with u^m, then the implicit
/// u-step with lagged mobility phi(u^m) and c^{m+1}, then the scaling limiters.
class KSSolver {
public:
    KSSolver(std::shared_ptr<const DGSpace> space, KSParams params, MobilityModel model, FluxParams flux,
        StepConfig config, std::optional<SourceTerms> sources = std::nullopt)
        : space_(std::move(space))
        , params_(params)
        , model_(model)
        , flux_(flux)
        , config_(config)
        , sources_(std::move(sources))
        , op1_(space_, flux)
        , op_phi_(space_, flux)
    {
        params_.validate();
        config_.validate();
        // CG needs a symmetric positive definite c-system: beta1 = 0 and a coercive a_1.
        c_system_spd_ = flux_.beta1 == 0.0 && check_admissible(flux_, 1.0, 1.0, space_->degree()).admissible;
        const int n = space_->nodes_per_element();
        mass_.resize(space_->num_dofs());
        for (int e = 0; e < space_->num_elements(); ++e)
            for (int q = 0; q < n; ++q)
                mass_[static_cast<std::size_t>(e) * n + q] = space_->weight(q);
    }

    [[nodiscard]] const DGSpace& space() const { return *space_; }
    [[nodiscard]] const std::shared_ptr<const DGSpace>& space_ptr() const { return space_; }
    [[nodiscard]] const KSParams& params() const { return params_; }
    [[nodiscard]] MobilityModel model() const { return model_; }
    [[nodiscard]] const StepConfig& config() const { return config_; }
    [[nodiscard]] const DDGOperator& laplacian_operator() const { return op1_; }
    [[nodiscard]] const Vector& mass() const { return mass_; }
    [[nodiscard]] double time_step() const { return config_.time_step(space_->mesh()); }

    /// Initial state: Gauss–Lobatto interpolants, limited once if they leave the bounds.
    template <class FU, class FC>
    SimulationState initial_state(FU&& u0, FC&& c0, double t0 = 0.0) const
    {
        SimulationState s;
        s.t = t0;
        s.u = interpolate(u0, space_);
        s.c = interpolate(c0, space_);
        const auto [lo, hi] = density_bounds(model_);
        const auto [umin, umax] = nodal_extrema(s.u);
        if (umin < lo || umax > hi)
            s.u = limit_u(s.u, model_).first;
        if (nodal_extrema(s.c).first < 0.0)
            s.c = limit_c(s.c).first;
        check_state(s, "initial state");
        return s;
    }

    /// Solve [(beta/h_t + alpha) M - A_1] c = (beta/h_t) M c^m + M u^m (+ M f_c).
    std::pair<DGField, SolveStats> step_c(const DGField& u_m, const DGField& c_m, double h_t,
        const std::vector<double>* f_c = nullptr)
    {
        if (!u_m.same_space(c_m))
            throw std::invalid_argument("step_c: fields on different spaces");
        const double shift = params_.beta / h_t + params_.alpha;
        const std::size_t ndof = mass_.size();
        Vector rhs(ndof);
        for (std::size_t i = 0; i < ndof; ++i) {
            rhs[i] = mass_[i] * (params_.beta / h_t * c_m[i] + u_m[i]);
            if (f_c)
                rhs[i] += mass_[i] * (*f_c)[i];
        }
        refresh_c_preconditioner(shift);
        const auto& A = op1_.matrix();
        auto apply = [&](std::span<const double> x, std::span<double> y) {
            A.apply(x, y);
            for (std::size_t i = 0; i < x.size(); ++i)
                y[i] = shift * mass_[i] * x[i] - y[i];
        };
        auto prec = [&](std::span<const double> r, std::span<double> z) { c_prec_.apply(r, z); };
        DGField c_next = c_m;
        SolveStats st = c_system_spd_
            ? cg_solve(apply, prec, rhs, c_next.values(), config_.linear_tol, config_.linear_max_iter)
            : gmres_solve(apply, prec, rhs, c_next.values(), config_.linear_tol, config_.linear_max_iter,
                config_.gmres_restart);
        if (!st.converged)
            throw SolverError("c-step linear solve did not converge (residual "
                    + std::to_string(st.residual) + ")", -1);
        return {std::move(c_next), st};
    }

    /// Damped Newton for M (u - u^m)/h_t = chi A_{phi(u^m)} [B g(u) - c^{m+1}] (+ M f_u).
    std::pair<DGField, NewtonStats> step_u(const DGField& u_m, const DGField& c_next, double h_t,
        const std::vector<double>* f_u = nullptr)
    {
        if (!u_m.same_space(c_next))
            throw std::invalid_argument("step_u: fields on different spaces");
        const std::size_t ndof = mass_.size();
        const int n = space_->nodes_per_element();
        const double chi = params_.chi;
        const double B = params_.B();
        const auto [lo, hi] = density_bounds(model_);

        Vector phi(ndof);
        for (std::size_t i = 0; i < ndof; ++i) {
            if (!admissible(u_m[i], model_))
                throw std::domain_error("step_u: u^m has a node outside the admissible range");
            phi[i] = mobility_phi(u_m[i], model_);
        }
        op_phi_.assemble(phi);
        const auto& A = op_phi_.matrix();

        DGField u = u_m;
        NewtonStats ns;
        Vector mu(ndof), Amu(ndof), r(ndof), dg(ndof), scale(ndof), delta(ndof), rhs(ndof);
        const double target = config_.newton_tol * std::sqrt(static_cast<double>(ndof));
        bool stagnated = false;
        BlockJacobi prec;
        prec.reset(space_->num_elements(), n);
        std::vector<double> blk(static_cast<std::size_t>(n) * n);

        // With beta1 = 0 the operator is symmetric and r is the gradient, in w = g(u), of
        //   J(w) = sum_i M_i (Phi(w_i) - u^m_i w_i)/h_t - M_i f_i w_i - chi/2 w.(B A w) + chi w.(A c),
        // with Phi' = g^{-1}. J then serves as the line-search merit next to ||r||.
        const bool symmetric = flux_.beta1 == 0.0;
        Vector Ac(ndof, 0.0);
        if (symmetric)
            A.apply(c_next.values(), Ac);
        struct Eval {
            double rnorm;
            double merit;
            double size;
        };
        auto evaluate = [&](std::span<const double> uu, Vector& out) {
            for (std::size_t i = 0; i < ndof; ++i)
                mu[i] = B * potential_g(uu[i], model_) - c_next[i];
            A.apply(mu, Amu);
            double merit = 0.0;
            for (std::size_t i = 0; i < ndof; ++i) {
                const double fi = f_u ? (*f_u)[i] : 0.0;
                out[i] = mass_[i] * (uu[i] - u_m[i]) / h_t - chi * Amu[i] - mass_[i] * fi;
                if (symmetric) {
                    const double w = (mu[i] + c_next[i]) / B;
                    const double Phi = model_ == MobilityModel::Saturated ? -std::log1p(-uu[i]) : uu[i];
                    merit += mass_[i] * (Phi - u_m[i] * w) / h_t - mass_[i] * fi * w
                        - 0.5 * chi * w * (Amu[i] - Ac[i]);
                }
            }
            double size = 0.0; // magnitude of the terms, for the round-off floor
            for (std::size_t i = 0; i < ndof; ++i)
                size = std::max(size, mass_[i] * std::abs(uu[i]) / h_t + chi * std::abs(Amu[i]));
            return Eval{norm2(out), merit, size};
        };
        Vector trial(ndof), r_trial(ndof), y(ndof);
        Eval cur = evaluate(u.values(), r);
        double rn = cur.rnorm;

        for (int it = 0;; ++it) {
            if (!std::isfinite(rn))
                throw SolverError("Newton residual is not finite", -1, ns.history);
            ns.history.push_back(rn);
            ns.residual = rn;
            ns.iterations = it;
            // Residuals below a few hundred ulps of the largest term are round-off.
            const double floor = 256.0 * std::numeric_limits<double>::epsilon() * cur.size
                * std::sqrt(static_cast<double>(ndof));
            if (rn <= std::max(target, floor) || stagnated) {
                ns.converged = true;
                break;
            }
            if (it >= config_.newton_max_iter)
                throw SolverError("Newton did not converge in " + std::to_string(it) + " iterations", -1, ns.history);

            // Jacobian J = M/h_t - chi B A diag(g'(u)). It is solved with the unknown scaled by
            // s = 1/g'(u): (J diag(s)) y = -r, delta = s y. Same Newton step, but the scaled
            // matrix M diag(s)/h_t - chi B A stays bounded as u approaches the boundary.
            // Block-Jacobi from its diagonal blocks.
            for (std::size_t i = 0; i < ndof; ++i) {
                dg[i] = potential_dg(u[i], model_);
                scale[i] = 1.0 / dg[i];
            }
            for (int e = 0; e < space_->num_elements(); ++e) {
                const double* Ad = A.diagonal_block(e);
                const std::size_t off = static_cast<std::size_t>(e) * n;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        blk[i * n + j] = (i == j ? mass_[off + i] * scale[off + i] / h_t : 0.0) - chi * B * Ad[i * n + j];
                prec.set_block(e, blk.data());
            }
            auto jac = [&](std::span<const double> x, std::span<double> y) {
                A.apply(x, y);
                for (std::size_t i = 0; i < ndof; ++i)
                    y[i] = mass_[i] * scale[i] * x[i] / h_t - chi * B * y[i];
            };
            auto pc = [&](std::span<const double> x, std::span<double> y) { prec.apply(x, y); };
            for (std::size_t i = 0; i < ndof; ++i)
                rhs[i] = -r[i];
            std::fill(delta.begin(), delta.end(), 0.0);
            const auto st = gmres_solve(jac, pc, rhs, delta, config_.linear_tol, config_.linear_max_iter,
                config_.gmres_restart);
            double slope = 0.0; // d merit / d lambda at lambda = 0
            for (std::size_t i = 0; i < ndof; ++i) {
                y[i] = delta[i];
                slope += r[i] * y[i];
                delta[i] *= scale[i];
            }
            ns.linear_iterations += st.iterations;

            // Boundary safeguard, node by node. A node whose step would cover more than sigma
            // of its distance to the admissible boundary takes the same linearised step in the
            // entropy variable instead, u <- g^{-1}(g(u) + g'(u) delta), which stays interior.
            // Elsewhere this is the plain Newton update.
            auto take_step = [&](double lambda) {
                bool guarded = false;
                for (std::size_t i = 0; i < ndof; ++i) {
                    const double d = lambda * delta[i];
                    const bool safe = d < 0.0 ? -d <= config_.damping * (u[i] - lo)
                                              : !(std::isfinite(hi) && d > config_.damping * (hi - u[i]));
                    if (safe) {
                        trial[i] = u[i] + d;
                    } else {
                        trial[i] = potential_g_inverse(potential_g(u[i], model_) + dg[i] * d, model_);
                        guarded = true;
                    }
                }
                return guarded;
            };

            // Backtracking: accept once ||r|| or (when available, along a descent direction)
            // the merit J decreases sufficiently. The full step is tried first.
            double lambda = 1.0;
            Eval next{};
            bool guarded = false;
            for (int ls = 0;; ++ls) {
                guarded = take_step(lambda);
                next = evaluate(trial, r_trial);
                const bool finite = std::isfinite(next.rnorm) && std::isfinite(next.merit);
                const bool r_ok = next.rnorm <= (1.0 - 1e-4 * lambda) * rn;
                const bool j_ok = symmetric && slope < 0.0 && next.merit <= cur.merit + 1e-4 * lambda * slope;
                if ((finite && (r_ok || j_ok)) || ls == 40)
                    break;
                lambda *= 0.5;
            }
            const double r_new = next.rnorm;
            cur = next;
            if (guarded)
                ++ns.damping_activations;
            if (lambda < 1.0)
                ++ns.line_search_cuts;
            double dmax = 0.0;
            double umax = 0.0;
            for (std::size_t i = 0; i < ndof; ++i) {
                dmax = std::max(dmax, std::abs(trial[i] - u[i]));
                umax = std::max(umax, std::abs(trial[i]));
                u[i] = trial[i];
            }
            std::swap(r, r_trial);
            rn = r_new;
            stagnated = dmax <= 1e-14 * (1.0 + umax);
        }
        return {std::move(u), std::move(ns)};
    }

    /// One full step: c-step, u-step, then limiters on u and c.
    StepReport advance(SimulationState& state, double h_t)
    {
        if (!(h_t > 0.0))
            throw std::invalid_argument("advance: time step must be positive");
        StepReport rep;
        rep.dt = h_t;
        rep.mass_before = integral(state.u);
        rep.energy_before = discrete_free_energy(state.u, state.c, params_, model_).total;

        const double t_next = state.t + h_t;
        std::vector<double> fu, fc;
        if (sources_) {
            fu = nodal_values(sources_->f_u, t_next);
            fc = nodal_values(sources_->f_c, t_next);
        }
        try {
            auto [c_next, cst] = step_c(state.u, state.c, h_t, sources_ ? &fc : nullptr);
            rep.c_solve = cst;
            auto [u_next, ns] = step_u(state.u, c_next, h_t, sources_ ? &fu : nullptr);
            rep.newton = std::move(ns);

            if (config_.cfl_check) {
                double phi0 = std::numeric_limits<double>::infinity();
                for (double v : state.u.values())
                    phi0 = std::min(phi0, mobility_phi(v, model_));
                rep.cfl_ratio = phi0 * params_.beta * space_->mesh().h_min() / h_t;
            }

            if (config_.limiter) {
                auto [ul, urep] = limit_u(u_next, model_);
                auto [cl, crep] = limit_c(c_next);
                rep.u_average_min = urep.min_average;
                rep.u_average_max = urep.max_average;
                rep.u_limiter = std::move(urep);
                rep.c_limiter = std::move(crep);
                u_next = std::move(ul);
                c_next = std::move(cl);
            } else {
                rep.u_average_min = std::numeric_limits<double>::infinity();
                rep.u_average_max = -std::numeric_limits<double>::infinity();
                for (int e = 0; e < space_->num_elements(); ++e) {
                    const double a = cell_average(u_next, e);
                    rep.u_average_min = std::min(rep.u_average_min, a);
                    rep.u_average_max = std::max(rep.u_average_max, a);
                }
            }
            state.u = std::move(u_next);
            state.c = std::move(c_next);
        } catch (const SolverError& err) {
            throw SolverError(std::string(err.what()) + " at step " + std::to_string(state.step + 1),
                state.step + 1, err.newton_log());
        }
        state.t = t_next;
        ++state.step;
        check_state(state, "accepted step");
        rep.mass_after = integral(state.u);
        rep.energy_after = discrete_free_energy(state.u, state.c, params_, model_).total;
        return rep;
    }

    /// Diagnostics of a state (theta and Newton fields left at their defaults).
    [[nodiscard]] DiagnosticsRecord diagnostics(const SimulationState& s) const
    {
        DiagnosticsRecord d;
        d.t = s.t;
        d.mass_u = integral(s.u);
        d.mass_c = integral(s.c);
        d.energy = discrete_free_energy(s.u, s.c, params_, model_).total;
        std::tie(d.min_u, d.max_u) = nodal_extrema(s.u);
        d.min_c = nodal_extrema(s.c).first;
        d.elements = space_->num_elements();
        d.u_average_min = std::numeric_limits<double>::infinity();
        d.u_average_max = -std::numeric_limits<double>::infinity();
        for (int e = 0; e < space_->num_elements(); ++e) {
            const double a = cell_average(s.u, e);
            d.u_average_min = std::min(d.u_average_min, a);
            d.u_average_max = std::max(d.u_average_max, a);
        }
        return d;
    }

    [[nodiscard]] DiagnosticsRecord diagnostics(const SimulationState& s, const StepReport& rep) const
    {
        DiagnosticsRecord d = diagnostics(s);
        d.energy = rep.energy_after;
        d.u_average_min = rep.u_average_min;
        d.u_average_max = rep.u_average_max;
        d.theta_min = std::min(rep.u_limiter.theta_min(), rep.c_limiter.theta_min());
        d.limited_u = rep.u_limiter.limited;
        d.limited_c = rep.c_limiter.limited;
        d.newton_iterations = rep.newton.iterations;
        return d;
    }

    using StepObserver = std::function<void(const SimulationState&, const StepReport&)>;
    using StopObserver = std::function<void(const SimulationState&)>;

    /// March to T_final with the configured step, shortening steps to land exactly on
    /// each stop time and on T_final. One record per accepted step.
    std::vector<DiagnosticsRecord> run_to_time(SimulationState& state, double T_final,
        const std::vector<double>& stop_times = {}, const StopObserver& on_stop = {},
        const StepObserver& on_step = {})
    {
        if (T_final < state.t)
            throw std::invalid_argument("run_to_time: final time precedes the current time");
        std::vector<DiagnosticsRecord> out;
        std::vector<double> stops;
        for (double s : stop_times)
            if (s > state.t && s <= T_final)
                stops.push_back(s);
        std::sort(stops.begin(), stops.end());
        if (stops.empty() || stops.back() < T_final)
            stops.push_back(T_final);

        const double dt = time_step();
        for (const double stop : stops) {
            while (state.t < stop) {
                const double remaining = stop - state.t;
                // Absorb round-off in the accumulated time instead of taking a sliver step.
                const bool last = remaining <= dt * (1.0 + 1e-6);
                const double h = last ? remaining : dt;
                const auto rep = advance(state, h);
                if (last)
                    state.t = stop;
                out.push_back(diagnostics(state, rep));
                if (on_step)
                    on_step(state, rep);
            }
            if (on_stop && stop != T_final)
                on_stop(state);
        }
        if (on_stop && !out.empty())
            on_stop(state);
        return out;
    }

private:
    [[nodiscard]] std::vector<double> nodal_values(const SpaceTimeFn& f, double t) const
    {
        std::vector<double> v(mass_.size());
        const int n = space_->nodes_per_element();
        for (int e = 0; e < space_->num_elements(); ++e)
            for (int q = 0; q < n; ++q) {
                const auto x = space_->node_coords(e, q);
                v[static_cast<std::size_t>(e) * n + q] = f(x[0], x[1], t);
            }
        return v;
    }

    void refresh_c_preconditioner(double shift)
    {
        if (shift == c_prec_shift_)
            return;
        const int n = space_->nodes_per_element();
        c_prec_.reset(space_->num_elements(), n);
        std::vector<double> blk(static_cast<std::size_t>(n) * n);
        for (int e = 0; e < space_->num_elements(); ++e) {
            const double* Ad = op1_.matrix().diagonal_block(e);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    blk[i * n + j] = (i == j ? shift * space_->weight(i) : 0.0) - Ad[i * n + j];
            c_prec_.set_block(e, blk.data());
        }
        c_prec_shift_ = shift;
    }

    void check_state(const SimulationState& s, const char* where) const
    {
        for (double v : s.u.values())
            if (!admissible(v, model_))
                throw SolverError(std::string("density left the admissible range in ") + where, s.step);
        if (config_.limiter)
            for (double v : s.c.values())
                if (v < 0.0)
                    throw SolverError(std::string("negative concentration in ") + where, s.step);
    }

    std::shared_ptr<const DGSpace> space_;
    KSParams params_;
    MobilityModel model_;
    FluxParams flux_;
    StepConfig config_;
    std::optional<SourceTerms> sources_;
    DDGOperator op1_;
    DDGOperator op_phi_;
    Vector mass_;
    BlockJacobi c_prec_;
    double c_prec_shift_ = std::numeric_limits<double>::quiet_NaN();
    bool c_system_spd_ = true;
};

} // namespace ksddg
