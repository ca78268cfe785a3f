#pragma once

// Hamiltonian flow Phi_t, its linearization dPhi_t (variational equation),
// the exponential map of scale c, and the radial potential u_z^c.

#include <algorithm>
#include <cmath>
#include <vector>

#include "hamflow/hamiltonians.hpp"

namespace hamflow {

inline MatrixXd canonical_omega(int n) {
    MatrixXd w = MatrixXd::Zero(2 * n, 2 * n);
    w.topRightCorner(n, n) = -MatrixXd::Identity(n, n);
    w.bottomLeftCorner(n, n) = MatrixXd::Identity(n, n);
    return w;
}

// omega(v, w) = sum_i v_{a_i} w_x^i - w_{a_i} v_x^i for (x; alpha)-ordered vectors
inline double omega_pair(const VectorXd& v, const VectorXd& w) {
    const int n = static_cast<int>(v.size()) / 2;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += v[n + i] * w[i] - w[n + i] * v[i];
    return s;
}

struct FlowOptions {
    int steps_per_unit = 1024;
    double dt = 0.0;              // explicit step size; overrides steps_per_unit when > 0
    double conserve_tol = 1e-8;   // relative per-unit-time drift allowance
    int max_refinements = 6;      // automatic step doublings on conservation failure
    bool jacobians = false;
    double symp_tol = 1e-8;
    double chart_margin = 0.0;
};

struct FlowTrajectory {
    std::vector<double> times;
    std::vector<VectorXd> x;
    std::vector<VectorXd> alpha;
    std::vector<MatrixXd> jac;  // dPhi_t; empty unless requested
    double H0 = 0.0;
    double dt = 0.0;     // uniform spacing
    int center = 0;      // index of t = 0

    int size() const { return static_cast<int>(times.size()); }
    bool has_jacobians() const { return !jac.empty(); }
    CotangentState state(int k) const { return {x[static_cast<size_t>(k)], alpha[static_cast<size_t>(k)]}; }
    // nearest grid node; offsets must be exact step multiples
    int index_at(double t) const {
        const int k = center + static_cast<int>(std::lround(t / dt));
        if (k < 0 || k >= size() || std::abs(times[static_cast<size_t>(k)] - t) > 1e-9 * (1.0 + std::abs(t)))
            throw Error("time not on trajectory grid");
        return k;
    }
};

namespace detail {

struct PhaseDeriv {
    VectorXd f;    // (H_a, -H_x)
    MatrixXd dxh;  // Jacobian of the Hamiltonian vector field (when requested)
};

inline PhaseDeriv phase_derivative(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& a,
                                   bool with_jacobian) {
    const int n = H.dim();
    HamJet j = H.at(x, a, with_jacobian ? 2 : 1);
    PhaseDeriv d;
    d.f.resize(2 * n);
    d.f.head(n) = j.grad_a();
    d.f.tail(n) = -j.grad_x();
    if (with_jacobian) {
        const MatrixXd hxa = j.hxa();  // (i,j) = d2H/dx^i dalpha_j
        d.dxh.resize(2 * n, 2 * n);
        d.dxh.topLeftCorner(n, n) = hxa.transpose();
        d.dxh.topRightCorner(n, n) = j.haa();
        d.dxh.bottomLeftCorner(n, n) = -j.hxx();
        d.dxh.bottomRightCorner(n, n) = -hxa;
    }
    return d;
}

// one RK4 step of the state (and optionally the variational matrix)
inline void rk4_step(const ChartHamiltonian& H, double h, VectorXd& y, MatrixXd* J) {
    const int n = H.dim();
    auto split = [n](const VectorXd& v) { return std::pair<VectorXd, VectorXd>(v.head(n), v.tail(n)); };
    const bool wj = J != nullptr;

    auto [x1, a1] = split(y);
    PhaseDeriv d1 = phase_derivative(H, x1, a1, wj);
    VectorXd y2 = y + 0.5 * h * d1.f;
    auto [x2, a2] = split(y2);
    PhaseDeriv d2 = phase_derivative(H, x2, a2, wj);
    VectorXd y3 = y + 0.5 * h * d2.f;
    auto [x3, a3] = split(y3);
    PhaseDeriv d3 = phase_derivative(H, x3, a3, wj);
    VectorXd y4 = y + h * d3.f;
    auto [x4, a4] = split(y4);
    PhaseDeriv d4 = phase_derivative(H, x4, a4, wj);

    if (wj) {
        const MatrixXd K1 = d1.dxh * (*J);
        const MatrixXd K2 = d2.dxh * (*J + 0.5 * h * K1);
        const MatrixXd K3 = d3.dxh * (*J + 0.5 * h * K2);
        const MatrixXd K4 = d4.dxh * (*J + h * K3);
        *J += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }
    y += (h / 6.0) * (d1.f + 2.0 * d2.f + 2.0 * d3.f + d4.f);
}

}  // namespace detail

inline double symplectic_defect(const MatrixXd& J) {
    const int n = static_cast<int>(J.rows()) / 2;
    const MatrixXd w = canonical_omega(n);
    return (J.transpose() * w * J - w).cwiseAbs().maxCoeff();
}

// Integrate over [tmin, tmax] with tmin <= 0 <= tmax; the initial state sits
// at t = 0 and both legs share one uniform grid. Steps are doubled
// automatically while the conservation drift exceeds tolerance.
inline FlowTrajectory flow_window(const ChartHamiltonian& H, const CotangentState& state0, double tmin,
                                  double tmax, FlowOptions opts = {}) {
    if (tmin > 0.0 || tmax < 0.0 || !(tmax > tmin)) throw Error("flow window must contain t = 0");
    if (state0.alpha.norm() == 0.0 && !H.zero_section_smooth())
        throw Error("flow from the zero section requires a smooth Hamiltonian");

    const double span = tmax - tmin;
    double dt = opts.dt > 0.0 ? opts.dt
                              : span / std::max(8.0, std::ceil(span * opts.steps_per_unit));
    const double tol = opts.conserve_tol * std::max(span, 1.0);

    for (int attempt = 0;; ++attempt) {
        const int nb = static_cast<int>(std::ceil(-tmin / dt - 1e-12));
        const int nf = static_cast<int>(std::ceil(tmax / dt - 1e-12));
        FlowTrajectory traj;
        traj.dt = dt;
        traj.center = nb;
        traj.H0 = H.value(state0.x, state0.alpha);
        const int total = nb + nf + 1;
        traj.times.resize(static_cast<size_t>(total));
        traj.x.resize(static_cast<size_t>(total));
        traj.alpha.resize(static_cast<size_t>(total));
        if (opts.jacobians) traj.jac.resize(static_cast<size_t>(total));

        const int n = H.dim();
        auto run_leg = [&](int count, double h) {
            VectorXd y(2 * n);
            y << state0.x, state0.alpha;
            MatrixXd J = MatrixXd::Identity(2 * n, 2 * n);
            for (int k = 1; k <= count; ++k) {
                detail::rk4_step(H, h, y, opts.jacobians ? &J : nullptr);
                const int idx = traj.center + (h > 0 ? k : -k);
                traj.times[static_cast<size_t>(idx)] = h * k;
                traj.x[static_cast<size_t>(idx)] = y.head(n);
                traj.alpha[static_cast<size_t>(idx)] = y.tail(n);
                if (opts.jacobians) traj.jac[static_cast<size_t>(idx)] = J;
                if (!H.chart().contains(y.head(n), opts.chart_margin))
                    throw Error("flow left chart domain at t = " + std::to_string(h * k));
            }
        };
        traj.times[static_cast<size_t>(nb)] = 0.0;
        traj.x[static_cast<size_t>(nb)] = state0.x;
        traj.alpha[static_cast<size_t>(nb)] = state0.alpha;
        if (opts.jacobians) traj.jac[static_cast<size_t>(nb)] = MatrixXd::Identity(2 * n, 2 * n);
        run_leg(nf, dt);
        run_leg(nb, -dt);

        double drift = 0.0;
        for (int k = 0; k < traj.size(); ++k)
            drift = std::max(drift, std::abs(H.value(traj.x[static_cast<size_t>(k)],
                                                     traj.alpha[static_cast<size_t>(k)]) -
                                             traj.H0));
        if (drift <= tol * (1.0 + std::abs(traj.H0))) {
            if (opts.jacobians) {
                double sdef = 0.0;
                for (const auto& J : traj.jac) sdef = std::max(sdef, symplectic_defect(J));
                if (sdef > opts.symp_tol) throw Error("linearization inconsistent with flow");
            }
            return traj;
        }
        if (attempt >= opts.max_refinements)
            throw Error("Hamiltonian conservation unattainable at maximum step refinement");
        dt *= 0.5;
    }
}

inline FlowTrajectory hamiltonian_flow(const ChartHamiltonian& H, const CotangentState& state0, double T,
                                       FlowOptions opts = {}) {
    return flow_window(H, state0, std::min(0.0, T), std::max(0.0, T), opts);
}

inline FlowTrajectory variational_flow(const ChartHamiltonian& H, const CotangentState& state0, double T,
                                       FlowOptions opts = {}) {
    opts.jacobians = true;
    return flow_window(H, state0, std::min(0.0, T), std::max(0.0, T), opts);
}

// --- exponential map of scale c ----------------------------------------------

// Find a > 0 with H(z, a*alpha) = c on the increasing branch.
inline double energy_scale(const ChartHamiltonian& H, const VectorXd& z, const VectorXd& alpha, double c) {
    if (alpha.norm() == 0.0) throw Error("exponential map needs alpha != 0");
    if (!(c > 0.0)) throw Error("exponential map needs c > 0");
    auto g = [&](double a) { return H.value(z, a * alpha) - c; };
    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (g(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 400) throw Error("scale outside reachable energies");
    }
    guard = 0;
    while (g(lo) > 0.0) {
        lo *= 0.5;
        if (++guard > 400) throw Error("scale outside reachable energies");
    }
    double a = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double ga = g(a);
        if (std::abs(ga) <= 1e-14 * (1.0 + c)) break;
        if (ga > 0.0)
            hi = a;
        else
            lo = a;
        const double slope = alpha.dot(H.at(z, a * alpha, 1).grad_a());
        double next = slope > 0.0 ? a - ga / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        a = next;
    }
    return a;
}

// Radial curve eta(t) = pi_M(Phi_t(a alpha)) with H(a alpha) = c, so that
// eta(t) = exp_z^c(t alpha) for covectors normalized to energy c.
struct ScaledRay {
    double a = 1.0;
    FlowTrajectory traj;
};

inline ScaledRay scaled_ray(const ChartHamiltonian& H, const VectorXd& z, const VectorXd& alpha, double c,
                            double t_max, FlowOptions opts = {}) {
    ScaledRay ray;
    ray.a = energy_scale(H, z, alpha, c);
    ray.traj = hamiltonian_flow(H, {z, ray.a * alpha}, t_max, opts);
    return ray;
}

// exp_z^c(t alpha) = pi_M(Phi_{t/a}(a alpha))
inline VectorXd exp_scale_c(const ChartHamiltonian& H, const VectorXd& z, const VectorXd& alpha, double c,
                            double t, FlowOptions opts = {}) {
    const double a = energy_scale(H, z, alpha, c);
    FlowTrajectory traj = hamiltonian_flow(H, {z, a * alpha}, t / a, opts);
    return traj.x.back();
}

// u_z^c(eta(t)) = c t + int_0^t L(eta') ds, integrated as int alpha(H_alpha) ds
// by the Fenchel equality along the energy level.
inline std::vector<double> radial_potential(const ChartHamiltonian& H, const VectorXd& z,
                                            const VectorXd& alpha, double c,
                                            const std::vector<double>& t_grid, FlowOptions opts = {}) {
    double t_max = 0.0;
    for (double t : t_grid) {
        if (t < 0.0) throw Error("radial potential needs t >= 0");
        t_max = std::max(t_max, t);
    }
    ScaledRay ray = scaled_ray(H, z, alpha, c, std::max(t_max, 1e-9), opts);
    const FlowTrajectory& tr = ray.traj;
    std::vector<double> integrand(static_cast<size_t>(tr.size()));
    for (int k = 0; k < tr.size(); ++k) {
        HamJet j = H.at(tr.x[static_cast<size_t>(k)], tr.alpha[static_cast<size_t>(k)], 1);
        integrand[static_cast<size_t>(k)] = tr.alpha[static_cast<size_t>(k)].dot(j.grad_a());
    }
    std::vector<double> cum(static_cast<size_t>(tr.size()), 0.0);
    for (int k = 1; k < tr.size(); ++k)
        cum[static_cast<size_t>(k)] = cum[static_cast<size_t>(k - 1)] +
                                      0.5 * tr.dt * (integrand[static_cast<size_t>(k - 1)] + integrand[static_cast<size_t>(k)]);
    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        const double pos = t / tr.dt;
        const int k0 = std::min(static_cast<int>(pos), tr.size() - 2);
        const double w = pos - k0;
        out.push_back((1.0 - w) * cum[static_cast<size_t>(k0)] + w * cum[static_cast<size_t>(k0 + 1)]);
    }
    return out;
}

}  // namespace hamflow
