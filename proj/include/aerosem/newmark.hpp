#pragma once

/// @file newmark.hpp
/// @brief Newmark time integration of  M a + B v + c0^2 K rho = f.
///
/// M and B are diagonal (collocated mass, collocated impedance damping), K
/// is applied matrix-free. The implicit acceleration update solves
///   (M + gamma dt B + beta dt^2 c0^2 K) a^{k+1}
///       = f^{k+1} - B (v^k + (1-gamma) dt a^k)
///                 - c0^2 K (rho^k + dt v^k + (1/2-beta) dt^2 a^k)
/// with CG preconditioned by diag(M + gamma dt B). With beta = 0 the system
/// matrix is diagonal and the step is explicit.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/linalg.hpp"
#include "aerosem/space.hpp"

namespace aerosem {

/// Anything exposing diagonal M and B, c0 and a stiffness action.
template <class S>
concept SecondOrderSystem = requires(const S& s, std::span<const double> x, std::span<double> y) {
    { s.size() } -> std::convertible_to<std::size_t>;
    { s.mass() } -> std::convertible_to<std::span<const double>>;
    { s.damping() } -> std::convertible_to<std::span<const double>>;
    { s.c0() } -> std::convertible_to<double>;
    s.apply_stiffness(x, y);
};

struct Probe {
    std::string name;
    Vec3 position{};
    std::vector<std::pair<std::size_t, double>> weights;  ///< basis values at the probe
};

inline Probe make_probe(const SpectralSpace& space, std::string name, const Vec3& x) {
    return Probe{std::move(name), x, basis_at(space, x)};
}

struct NewmarkConfig {
    double dt = 0.0;
    double t_final = 0.0;
    double beta = 0.25;
    double gamma = 0.5;
    double cg_tol = 1e-10;
    int cg_max_iter = 1000;
    int snapshot_stride = 0;  ///< 0 disables snapshots

    void validate() const {
        detail::require(dt > 0.0, ErrorCode::invalid_argument, "time step must be > 0");
        detail::require(t_final >= dt, ErrorCode::invalid_argument, "final time must be >= time step");
        detail::require(beta >= 0.0 && beta <= 0.5, ErrorCode::invalid_argument, "Newmark beta must lie in [0, 1/2]");
        detail::require(gamma >= 0.0 && gamma <= 1.0, ErrorCode::invalid_argument, "Newmark gamma must lie in [0, 1]");
        detail::require(cg_tol > 0.0 && cg_max_iter > 0, ErrorCode::invalid_argument, "invalid CG settings");
        detail::require(snapshot_stride >= 0, ErrorCode::invalid_argument, "snapshot stride must be >= 0");
    }

    std::size_t num_steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }
};

struct WaveState {
    std::vector<double> rho;
    std::vector<double> v;
    std::vector<double> a;
    double t = 0.0;
    std::size_t k = 0;
};

template <SecondOrderSystem S>
double discrete_energy(const WaveState& s, const S& sys) {
    const auto m = sys.mass();
    std::vector<double> kr(sys.size());
    sys.apply_stiffness(s.rho, kr);
    double e = 0.0;
    for (std::size_t i = 0; i < sys.size(); ++i) e += m[i] * s.v[i] * s.v[i] + sys.c0() * sys.c0() * s.rho[i] * kr[i];
    return 0.5 * e;
}

template <SecondOrderSystem S>
class NewmarkIntegrator {
public:
    NewmarkIntegrator(const S& sys, NewmarkConfig cfg) : sys_(&sys), cfg_(cfg) {
        cfg_.validate();
        const auto n = sys.size();
        const auto m = sys.mass();
        const auto b = sys.damping();
        precond_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double bi = b.empty() ? 0.0 : b[i];
            precond_[i] = m[i] + cfg_.gamma * cfg_.dt * bi;
            detail::require(m[i] > 0.0, ErrorCode::invalid_argument, "mass diagonal must be strictly positive");
        }
        pred_rho_.resize(n);
        pred_v_.resize(n);
        rhs_.resize(n);
        tmp_.resize(n);
    }

    const NewmarkConfig& config() const { return cfg_; }

    /// Initial state with a^0 = M^{-1}(f^0 - B v^0 - c0^2 K rho^0).
    WaveState initialize(std::vector<double> rho0, std::vector<double> v0, std::span<const double> f0) const {
        const auto n = sys_->size();
        detail::require(rho0.size() == n && v0.size() == n && f0.size() == n, ErrorCode::invalid_argument,
                        "initial data length mismatch");
        WaveState s;
        s.rho = std::move(rho0);
        s.v = std::move(v0);
        s.a.assign(n, 0.0);
        std::vector<double> kr(n);
        sys_->apply_stiffness(s.rho, kr);
        const auto m = sys_->mass();
        const auto b = sys_->damping();
        const double c2 = sys_->c0() * sys_->c0();
        for (std::size_t i = 0; i < n; ++i)
            s.a[i] = (f0[i] - (b.empty() ? 0.0 : b[i] * s.v[i]) - c2 * kr[i]) / m[i];
        return s;
    }

    /// Advances `s` by one step; `f_next` is the load at t^{k+1}.
    linalg::CgResult step(WaveState& s, std::span<const double> f_next) {
        const auto n = sys_->size();
        const double dt = cfg_.dt, beta = cfg_.beta, gamma = cfg_.gamma;
        const double c2 = sys_->c0() * sys_->c0();
        const auto b = sys_->damping();
        const bool damped = !b.empty();
        for (std::size_t i = 0; i < n; ++i) {
            pred_rho_[i] = s.rho[i] + dt * s.v[i] + (0.5 - beta) * dt * dt * s.a[i];
            pred_v_[i] = s.v[i] + (1.0 - gamma) * dt * s.a[i];
        }
        sys_->apply_stiffness(pred_rho_, tmp_);
        for (std::size_t i = 0; i < n; ++i)
            rhs_[i] = f_next[i] - (damped ? b[i] * pred_v_[i] : 0.0) - c2 * tmp_[i];

        linalg::CgResult res;
        if (beta == 0.0) {
            for (std::size_t i = 0; i < n; ++i) s.a[i] = rhs_[i] / precond_[i];
            res.converged = true;
        } else {
            const double kcoef = beta * dt * dt * c2;
            auto apply = [&](std::span<const double> x, std::span<double> y) {
                sys_->apply_stiffness(x, y);
                for (std::size_t i = 0; i < n; ++i) y[i] = precond_[i] * x[i] + kcoef * y[i];
            };
            // a^k is the initial guess
            res = linalg::pcg(apply, precond_, rhs_, s.a, cfg_.cg_tol, cfg_.cg_max_iter);
            if (!res.converged)
                throw Error(ErrorCode::solver_failure,
                            "Newmark step " + std::to_string(s.k + 1) + ": CG did not converge in " +
                                std::to_string(res.iterations) + " iterations (relative residual " +
                                std::to_string(res.relative_residual) + ")");
        }
        for (std::size_t i = 0; i < n; ++i) {
            s.rho[i] = pred_rho_[i] + beta * dt * dt * s.a[i];
            s.v[i] = pred_v_[i] + gamma * dt * s.a[i];
        }
        ++s.k;
        s.t = static_cast<double>(s.k) * dt;
        return res;
    }

private:
    const S* sys_;
    NewmarkConfig cfg_;
    std::vector<double> precond_, pred_rho_, pred_v_, rhs_, tmp_;
};

template <SecondOrderSystem S>
WaveState newmark_step(WaveState state, const S& sys, std::span<const double> f_next, const NewmarkConfig& cfg) {
    NewmarkIntegrator<S> integ(sys, cfg);
    integ.step(state, f_next);
    return state;
}

/// Fills `out` (pre-zeroed, length N_A) with the load at step k, time t.
using LoadFunction = std::function<void(std::size_t k, double t, std::span<double> out)>;

struct RunResult {
    std::vector<std::string> probe_names;
    std::vector<std::vector<double>> rows;  ///< time, probe values...
    WaveState final_state;
    long total_cg_iterations = 0;
    int max_cg_iterations = 0;
};

struct RunHooks {
    std::function<void(const WaveState&)> on_snapshot;
    std::function<void(const WaveState&)> on_step;
};

inline double probe_value(const Probe& p, std::span<const double> rho) {
    double s = 0.0;
    for (const auto& [dof, w] : p.weights) s += w * rho[dof];
    return s;
}

/// Runs N = T/dt steps from (rho0, v0), recording probes after every step
/// (and at t = 0). Snapshots are emitted at t = 0 and every stride steps.
template <SecondOrderSystem S>
RunResult run(const S& sys, const LoadFunction& load, const NewmarkConfig& cfg, std::vector<double> rho0,
              std::vector<double> v0, const std::vector<Probe>& probes, const RunHooks& hooks = {}) {
    NewmarkIntegrator<S> integ(sys, cfg);
    const auto n = sys.size();
    std::vector<double> f(n, 0.0);
    load(0, 0.0, f);
    RunResult out;
    for (const auto& p : probes) out.probe_names.push_back(p.name);
    WaveState s = integ.initialize(std::move(rho0), std::move(v0), f);

    auto record = [&]() {
        std::vector<double> row{s.t};
        for (const auto& p : probes) row.push_back(probe_value(p, s.rho));
        out.rows.push_back(std::move(row));
    };
    record();
    if (hooks.on_snapshot && cfg.snapshot_stride > 0) hooks.on_snapshot(s);

    const auto steps = cfg.num_steps();
    for (std::size_t k = 0; k < steps; ++k) {
        std::fill(f.begin(), f.end(), 0.0);
        load(k + 1, static_cast<double>(k + 1) * cfg.dt, f);
        const auto res = integ.step(s, f);
        out.total_cg_iterations += res.iterations;
        out.max_cg_iterations = std::max(out.max_cg_iterations, res.iterations);
        if (!linalg::all_finite(s.rho) || !linalg::all_finite(s.v))
            throw Error(ErrorCode::non_finite, "non-finite state at step " + std::to_string(s.k));
        record();
        if (hooks.on_step) hooks.on_step(s);
        if (hooks.on_snapshot && cfg.snapshot_stride > 0 && s.k % static_cast<std::size_t>(cfg.snapshot_stride) == 0)
            hooks.on_snapshot(s);
    }
    out.final_state = std::move(s);
    return out;
}

} // namespace aerosem
