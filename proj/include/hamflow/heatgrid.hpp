#pragma once

// Finite-volume realizations of the evolution problems on periodic grids:
// the heat equation du/dt = Delta^H_m u (explicit and minimizing-movement),
// the entropy gradient-flow equation, and Dirichlet energy minimization.
//
// The discrete Laplacian is the exact negative L^2(m)-gradient of the face
// energy sum_f H(x_f, g_f) w_f h^d, which makes mass conservation, energy
// dissipation and the minimizing-movement/Laplacian duality hold at the
// discrete level rather than only in the limit.

#include <json.hpp>

#include <array>
#include <deque>
#include <fstream>
#include <limits>
#include <vector>

#include "hamflow/hamiltonians.hpp"

namespace hamflow {

struct GridField {
    int dim = 1;
    std::array<int, 2> shape = {0, 1};
    double h = 0.0;
    std::array<double, 2> origin = {0.0, 0.0};
    bool periodic = true;
    std::vector<double> values;
    std::vector<double> sigma;  // cell weight; mass m_c = e^{-sigma_c} h^dim

    int cells() const { return shape[0] * shape[1]; }
    int idx(int i, int j = 0) const {
        if (periodic) {
            i = (i % shape[0] + shape[0]) % shape[0];
            j = (j % shape[1] + shape[1]) % shape[1];
        }
        return i * shape[1] + j;
    }
    VectorXd coord(int i, int j = 0) const {
        VectorXd x(dim);
        x[0] = origin[0] + (i + 0.5) * h;
        if (dim == 2) x[1] = origin[1] + (j + 0.5) * h;
        return x;
    }
    double cell_mass(int c) const { return std::exp(-sigma[static_cast<size_t>(c)]) * std::pow(h, dim); }
    double total_mass() const {
        double s = 0.0;
        for (int c = 0; c < cells(); ++c) s += cell_mass(c);
        return s;
    }
    double integral() const {  // int u dm
        double s = 0.0;
        for (int c = 0; c < cells(); ++c) s += values[static_cast<size_t>(c)] * cell_mass(c);
        return s;
    }
    double l2m_norm(const GridField& other) const {  // ||u - other||_{L^2(m)}
        double s = 0.0;
        for (int c = 0; c < cells(); ++c)
            s += sqr(values[static_cast<size_t>(c)] - other.values[static_cast<size_t>(c)]) * cell_mass(c);
        return std::sqrt(s);
    }
    void validate() const {
        if (shape[0] < 8 || (dim == 2 && shape[1] < 8)) throw Error("grid needs >= 8 cells per axis");
        if (!(total_mass() > 0.0)) throw Error("grid mass must be positive");
    }
};

inline GridField make_grid_1d(int n, double length, bool periodic = true, double origin = 0.0) {
    GridField g;
    g.dim = 1;
    g.shape = {n, 1};
    g.h = length / n;
    g.origin = {origin, 0.0};
    g.periodic = periodic;
    g.values.assign(static_cast<size_t>(n), 0.0);
    g.sigma.assign(static_cast<size_t>(n), 0.0);
    g.validate();
    return g;
}

inline GridField make_grid_2d(int nx, int ny, double length_x, bool periodic = true) {
    GridField g;
    g.dim = 2;
    g.shape = {nx, ny};
    g.h = length_x / nx;
    g.origin = {0.0, 0.0};
    g.periodic = periodic;
    g.values.assign(static_cast<size_t>(nx * ny), 0.0);
    g.sigma.assign(static_cast<size_t>(nx * ny), 0.0);
    g.validate();
    return g;
}

namespace gridops {

// H value and fiber gradient at a face covector; exact-zero covectors
// short-circuit to (H(x,0), 0) so C^1-only zero sections stay evaluable
struct FaceHam {
    double value;
    VectorXd flux;  // H_alpha
};

inline FaceHam face_ham(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& g) {
    if (g.norm() < 1e-30) return {H.value(x, VectorXd::Zero(g.size())), VectorXd::Zero(g.size())};
    HamJet j = H.at(x, g, 1);
    return {j.value(), j.grad_a()};
}

using FaceStencil = std::span<const std::pair<int, double>>;

// derivative stencil along `axis` at cell (i, j): centered when both
// neighbours exist, one-sided at box edges
inline int axis_derivative_stencil(const GridField& f, int i, int j, int axis,
                                   std::pair<int, double>* out, double scale) {
    const int n_axis = axis == 0 ? f.shape[0] : f.shape[1];
    const int c = axis == 0 ? i : j;
    auto cell = [&](int k) { return axis == 0 ? f.idx(k, j) : f.idx(i, k); };
    const double inv_h = scale / f.h;
    if (f.periodic || (c > 0 && c + 1 < n_axis)) {
        out[0] = {cell(c + 1), 0.5 * inv_h};
        out[1] = {cell(c - 1), -0.5 * inv_h};
    } else if (c == 0) {
        out[0] = {cell(1), inv_h};
        out[1] = {cell(0), -inv_h};
    } else {
        out[0] = {cell(c), inv_h};
        out[1] = {cell(c - 1), -inv_h};
    }
    return 2;
}

// Enumerate faces; for each face: position, weight factor w_f = e^{-sigma_f},
// face axis, the normal-gradient stencil, and (2D) the tangential stencil
// averaged over the two adjacent cells.
// visit(x_f, w_f, axis, normal_stencil, tangential_stencil)
template <class Visit>
void for_each_face(const GridField& f, Visit&& visit) {
    const int nx = f.shape[0], ny = f.shape[1];
    const double inv_h = 1.0 / f.h;
    auto emit = [&](int axis, int i, int j) {
        const int a = f.idx(i, j);
        const int bi = axis == 0 ? i + 1 : i, bj = axis == 0 ? j : j + 1;
        const int b = f.idx(bi, bj);
        VectorXd xf(f.dim);
        xf[0] = f.origin[0] + (axis == 0 ? (i + 1) * f.h : (i + 0.5) * f.h);
        if (f.dim == 2) xf[1] = f.origin[1] + (axis == 0 ? (j + 0.5) * f.h : (j + 1) * f.h);
        const double wf =
            std::exp(-0.5 * (f.sigma[static_cast<size_t>(a)] + f.sigma[static_cast<size_t>(b)]));
        std::array<std::pair<int, double>, 2> normal{{{a, -inv_h}, {b, inv_h}}};
        std::array<std::pair<int, double>, 8> tang{};
        int tcount = 0;
        if (f.dim == 2) {
            const int taxis = 1 - axis;
            tcount += axis_derivative_stencil(f, i, j, taxis, tang.data() + tcount, 0.5);
            tcount += axis_derivative_stencil(f, bi, bj, taxis, tang.data() + tcount, 0.5);
        }
        visit(xf, wf, axis, FaceStencil(normal.data(), 2),
              FaceStencil(tang.data(), static_cast<size_t>(tcount)));
    };
    const int lx = f.periodic ? nx : nx - 1;
    for (int i = 0; i < lx; ++i)
        for (int j = 0; j < ny; ++j) emit(0, i, j);
    if (f.dim == 2) {
        const int ly = f.periodic ? ny : ny - 1;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ly; ++j) emit(1, i, j);
    }
}

inline VectorXd face_gradient(const GridField& f, int axis, FaceStencil normal, FaceStencil tang) {
    VectorXd g = VectorXd::Zero(f.dim);
    for (const auto& [c, w] : normal) g[axis] += w * f.values[static_cast<size_t>(c)];
    if (f.dim == 2) {
        const int taxis = 1 - axis;
        for (const auto& [c, w] : tang) g[taxis] += w * f.values[static_cast<size_t>(c)];
    }
    return g;
}

}  // namespace gridops

// face-based Dirichlet energy: sum_f H(x_f, g_f) w_f h^d
inline double dirichlet_energy_flux(const ChartHamiltonian& H, const GridField& f) {
    double e = 0.0;
    const double vol = std::pow(f.h, f.dim);
    gridops::for_each_face(f, [&](const VectorXd& xf, double wf, int axis, gridops::FaceStencil normal,
                                  gridops::FaceStencil tang) {
        VectorXd g = gridops::face_gradient(f, axis, normal, tang);
        e += gridops::face_ham(H, xf, g).value * wf * vol;
    });
    return e;
}

// dE/du_c of the face energy (not yet divided by cell masses)
inline std::vector<double> energy_gradient_flux(const ChartHamiltonian& H, const GridField& f) {
    std::vector<double> grad(static_cast<size_t>(f.cells()), 0.0);
    const double vol = std::pow(f.h, f.dim);
    gridops::for_each_face(f, [&](const VectorXd& xf, double wf, int axis, gridops::FaceStencil normal,
                                  gridops::FaceStencil tang) {
        VectorXd g = gridops::face_gradient(f, axis, normal, tang);
        gridops::FaceHam fh = gridops::face_ham(H, xf, g);
        const double scale = wf * vol;
        for (const auto& [c, w] : normal) grad[static_cast<size_t>(c)] += scale * fh.flux[axis] * w;
        if (f.dim == 2) {
            const int taxis = 1 - axis;
            for (const auto& [c, w] : tang) grad[static_cast<size_t>(c)] += scale * fh.flux[taxis] * w;
        }
    });
    return grad;
}

// cell-centered energy sum_c H(x_c, Du_c) m_c with centered differences
// (periodic grids); the face energy above is the variational one
inline double discrete_energy(const ChartHamiltonian& H, const GridField& f) {
    if (!f.periodic) throw Error("discrete_energy expects a periodic grid");
    double e = 0.0;
    for (int i = 0; i < f.shape[0]; ++i)
        for (int j = 0; j < f.shape[1]; ++j) {
            VectorXd g(f.dim);
            g[0] = (f.values[static_cast<size_t>(f.idx(i + 1, j))] -
                    f.values[static_cast<size_t>(f.idx(i - 1, j))]) /
                   (2.0 * f.h);
            if (f.dim == 2)
                g[1] = (f.values[static_cast<size_t>(f.idx(i, j + 1))] -
                        f.values[static_cast<size_t>(f.idx(i, j - 1))]) /
                       (2.0 * f.h);
            const int c = f.idx(i, j);
            e += gridops::face_ham(H, f.coord(i, j), g).value * f.cell_mass(c);
        }
    return e;
}

// Delta^H_m u in flux form: -(1/m_c) dE/du_c
inline GridField discrete_laplacian(const ChartHamiltonian& H, const GridField& f) {
    GridField out = f;
    std::vector<double> grad = energy_gradient_flux(H, f);
    for (int c = 0; c < f.cells(); ++c) out.values[static_cast<size_t>(c)] = -grad[static_cast<size_t>(c)] / f.cell_mass(c);
    return out;
}

// crude stability bound dt <= h^2 / (2 d Lmax) from the fiber Hessian on the
// current data range
inline double stable_dt(const ChartHamiltonian& H, const GridField& f) {
    double lmax = 1e-12;
    gridops::for_each_face(f, [&](const VectorXd& xf, double, int axis, gridops::FaceStencil normal,
                                  gridops::FaceStencil tang) {
        VectorXd g = gridops::face_gradient(f, axis, normal, tang);
        if (g.norm() < 1e-12) return;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(H.at(xf, g, 2).haa());
        lmax = std::max(lmax, es.eigenvalues().maxCoeff());
    });
    return f.h * f.h / (2.0 * f.dim * lmax);
}

struct FlowDiagnostics {
    std::vector<double> times, mass, energy, entropy, slope;
};

namespace detail {

inline double field_entropy(const GridField& f) {
    // Ent of the probability density u / int u dm against m / m[total]
    const double mtot = f.total_mass();
    const double utot = f.integral();
    if (utot <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    double e = 0.0;
    for (int c = 0; c < f.cells(); ++c) {
        const double rho = f.values[static_cast<size_t>(c)] * mtot / utot;
        if (rho > 0.0) e += rho * std::log(rho) * f.cell_mass(c) / mtot;
    }
    return e;
}

inline double lap_l2m(const ChartHamiltonian& H, const GridField& f) {
    GridField lap = discrete_laplacian(H, f);
    double s = 0.0;
    for (int c = 0; c < f.cells(); ++c) s += sqr(lap.values[static_cast<size_t>(c)]) * f.cell_mass(c);
    return std::sqrt(s);
}

}  // namespace detail

inline void heat_step(const ChartHamiltonian& H, GridField& f, double dt) {
    std::vector<double> grad = energy_gradient_flux(H, f);
    for (int c = 0; c < f.cells(); ++c)
        f.values[static_cast<size_t>(c)] -= dt * grad[static_cast<size_t>(c)] / f.cell_mass(c);
}

struct HeatResult {
    GridField field;
    FlowDiagnostics diag;
};

inline HeatResult heat_solve_explicit(const ChartHamiltonian& H, const GridField& f0, double T, double dt,
                                      int diag_every = 64) {
    HeatResult r{f0, {}};
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
    double prev_energy = std::numeric_limits<double>::infinity();
    auto record = [&](double t) {
        const double e = dirichlet_energy_flux(H, r.field);
        if (e > prev_energy + 1e-12 * (1.0 + std::abs(prev_energy))) throw Error("time step too large");
        prev_energy = e;
        r.diag.times.push_back(t);
        r.diag.mass.push_back(r.field.integral());
        r.diag.energy.push_back(e);
        r.diag.entropy.push_back(detail::field_entropy(r.field));
        r.diag.slope.push_back(detail::lap_l2m(H, r.field));
    };
    record(0.0);
    for (int s = 0; s < steps; ++s) {
        heat_step(H, r.field, std::min(dt, T - s * dt));
        if ((s + 1) % diag_every == 0 || s + 1 == steps) record(std::min((s + 1) * dt, T));
    }
    return r;
}

// --- inner convex solver (L-BFGS with Armijo backtracking) --------------------

namespace detail {

template <class FG, class Stop>
double lbfgs_minimize(VectorXd& x, FG&& fg, Stop&& stop, int max_iter) {
    const int mem = 10;
    std::deque<VectorXd> S, Y;
    std::deque<double> RHO;
    VectorXd g(x.size());
    double f = fg(x, g);
    for (int it = 0; it < max_iter; ++it) {
        if (stop(g)) return f;
        // two-loop recursion
        VectorXd q = g;
        std::vector<double> alpha(S.size());
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            alpha[static_cast<size_t>(i)] = RHO[static_cast<size_t>(i)] * S[static_cast<size_t>(i)].dot(q);
            q -= alpha[static_cast<size_t>(i)] * Y[static_cast<size_t>(i)];
        }
        if (!S.empty()) {
            const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
            q *= gamma;
        }
        for (size_t i = 0; i < S.size(); ++i) {
            const double beta = RHO[i] * Y[i].dot(q);
            q += (alpha[i] - beta) * S[i];
        }
        VectorXd d = -q;
        double slope = g.dot(d);
        if (slope >= 0.0) {  // fall back to steepest descent
            d = -g;
            slope = -g.squaredNorm();
        }
        double t = 1.0;
        VectorXd xn;
        VectorXd gn(x.size());
        double fn = f;
        bool ok = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + t * d;
            fn = fg(xn, gn);
            if (fn <= f + 1e-4 * t * slope) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok) return f;  // line search stagnated; caller checks the residual
        VectorXd s = xn - x, y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            RHO.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > mem) {
                S.pop_front();
                Y.pop_front();
                RHO.pop_front();
            }
        }
        x = xn;
        f = fn;
        g = gn;
    }
    return f;
}

}  // namespace detail

// dense Hessian of the face energy: d2E/du_a du_b assembled from the fiber
// Hessians H_{aa}(g_f) and the face stencils
inline MatrixXd energy_hessian_flux(const ChartHamiltonian& H, const GridField& f) {
    const int n = f.cells();
    MatrixXd out = MatrixXd::Zero(n, n);
    const double vol = std::pow(f.h, f.dim);
    gridops::for_each_face(f, [&](const VectorXd& xf, double wf, int axis, gridops::FaceStencil normal,
                                  gridops::FaceStencil tang) {
        VectorXd g = gridops::face_gradient(f, axis, normal, tang);
        MatrixXd haa;
        if (g.norm() < 1e-30)
            haa = MatrixXd::Zero(f.dim, f.dim);
        else
            haa = H.at(xf, g, 2).haa();
        const double scale = wf * vol;
        auto each = [&](auto&& fn) {
            for (const auto& [c, w] : normal) fn(c, w, axis);
            if (f.dim == 2)
                for (const auto& [c, w] : tang) fn(c, w, 1 - axis);
        };
        each([&](int c1, double w1, int a1) {
            each([&](int c2, double w2, int a2) {
                out(c1, c2) += scale * haa(a1, a2) * w1 * w2;
            });
        });
    });
    return out;
}

// one step of the minimizing-movement scheme: the unique minimizer of
//   u -> E(u) + ||u - u0||^2_{L^2(m)} / (2 delta)
inline GridField minimizing_movement_step(const ChartHamiltonian& H, const GridField& f0, double delta,
                                          double grad_tol = 1e-10, int max_iter = 300) {
    const int n = f0.cells();
    std::vector<double> mass(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c) mass[static_cast<size_t>(c)] = f0.cell_mass(c);
    GridField work = f0;
    auto fg = [&](const VectorXd& x, VectorXd& g) {
        for (int c = 0; c < n; ++c) work.values[static_cast<size_t>(c)] = x[c];
        std::vector<double> eg = energy_gradient_flux(H, work);
        double obj = dirichlet_energy_flux(H, work);
        for (int c = 0; c < n; ++c) {
            const double diff = x[c] - f0.values[static_cast<size_t>(c)];
            obj += 0.5 * mass[static_cast<size_t>(c)] * diff * diff / delta;
            g[c] = eg[static_cast<size_t>(c)] + mass[static_cast<size_t>(c)] * diff / delta;
        }
        return obj;
    };
    // convergence in the variational residual r_c = (dJ/du_c)/m_c
    auto residual = [&](const VectorXd& g) {
        double res = 0.0;
        for (int c = 0; c < n; ++c)
            res += sqr(g[c] / mass[static_cast<size_t>(c)]) * mass[static_cast<size_t>(c)];
        return std::sqrt(res);
    };
    const double scale = std::max(1.0, std::abs(dirichlet_energy_flux(H, f0)));
    VectorXd x(n);
    for (int c = 0; c < n; ++c) x[c] = f0.values[static_cast<size_t>(c)];
    detail::lbfgs_minimize(x, fg, [&](const VectorXd& g) { return residual(g) <= 1e3 * grad_tol * scale; },
                           max_iter);
    // Newton polish with the exact objective Hessian: convex, so plain steps
    // converge, and the polish is not limited by energy-difference roundoff
    VectorXd g(n);
    for (int it = 0; it < 25; ++it) {
        fg(x, g);
        if (residual(g) <= grad_tol * scale) break;
        for (int c = 0; c < n; ++c) work.values[static_cast<size_t>(c)] = x[c];
        MatrixXd Hs = energy_hessian_flux(H, work);
        for (int c = 0; c < n; ++c) Hs(c, c) += mass[static_cast<size_t>(c)] / delta;
        Eigen::LLT<MatrixXd> llt(Hs);
        if (llt.info() != Eigen::Success) {
            Hs += 1e-10 * Hs.trace() / n * MatrixXd::Identity(n, n);
            llt.compute(Hs);
        }
        x -= llt.solve(g);
    }
    fg(x, g);
    if (residual(g) > grad_tol * scale)
        throw Error("inner solve failed: residual " + std::to_string(residual(g)));
    GridField out = f0;
    for (int c = 0; c < n; ++c) out.values[static_cast<size_t>(c)] = x[c];
    return out;
}

struct SlopeReport {
    double metric_slope = 0.0;   // lim ||u_{t+d} - u_t|| / d
    double energy_slope = 0.0;   // lim (E(u_t) - E(u_{t+d})) / d
    double lap_norm = 0.0;       // ||Delta^H_m u||_{L^2(m)}
    double rel_err_metric = 0.0; // against lap_norm
    double rel_err_energy = 0.0; // against lap_norm^2
};

// verify ||du/dt|| = |grad(-E)|(u) = ||Delta^H_m u|| and the energy
// dissipation rate at a flow snapshot, by extrapolated one-sided slopes
inline SlopeReport slope_and_identity_check(const ChartHamiltonian& H, const GridField& f, double dt_solver,
                                            const std::vector<double>& deltas) {
    SlopeReport rep;
    rep.lap_norm = detail::lap_l2m(H, f);
    const double e0 = dirichlet_energy_flux(H, f);
    std::vector<double> ms, es;
    for (double d : deltas) {
        HeatResult r = heat_solve_explicit(H, f, d, dt_solver, 1 << 30);
        ms.push_back(f.l2m_norm(r.field) / d);
        es.push_back((e0 - dirichlet_energy_flux(H, r.field)) / d);
    }
    // first-order Richardson from the two smallest deltas (assumed sorted
    // decreasing)
    const size_t k = ms.size();
    rep.metric_slope = 2.0 * ms[k - 1] - ms[k - 2];
    rep.energy_slope = 2.0 * es[k - 1] - es[k - 2];
    if (rep.lap_norm > 1e-14) {
        rep.rel_err_metric = std::abs(rep.metric_slope - rep.lap_norm) / rep.lap_norm;
        rep.rel_err_energy = std::abs(rep.energy_slope - sqr(rep.lap_norm)) / sqr(rep.lap_norm);
    }
    return rep;
}

// --- entropy gradient flow -----------------------------------------------------

// flux form of d rho/dt = -div_m(rho grad[-log rho]); face densities by the
// logarithmic mean, which reduces the scheme exactly to the heat flux when
// H is quadratic
inline void entropy_flow_step(const ChartHamiltonian& H, GridField& f, double dt, double rho_min = 1e-10) {
    const int n = f.cells();
    std::vector<double> logrho(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c) {
        if (f.values[static_cast<size_t>(c)] < rho_min)
            throw Error("positivity lost; refine or shorten horizon");
        logrho[static_cast<size_t>(c)] = std::log(f.values[static_cast<size_t>(c)]);
    }
    GridField lf = f;
    lf.values = logrho;
    std::vector<double> update(static_cast<size_t>(n), 0.0);
    const double vol = std::pow(f.h, f.dim);
    auto logmean = [](double a, double b) {
        const double la = std::log(a), lb = std::log(b);
        if (std::abs(la - lb) < 1e-12) return 0.5 * (a + b);
        return (a - b) / (la - lb);
    };
    gridops::for_each_face(f, [&](const VectorXd& xf, double wf, int axis, gridops::FaceStencil normal,
                                  gridops::FaceStencil tang) {
        VectorXd g = -gridops::face_gradient(lf, axis, normal, tang);  // -d log rho at the face
        gridops::FaceHam fh = gridops::face_ham(H, xf, g);
        const double rho_f = logmean(f.values[static_cast<size_t>(normal[0].first)],
                                     f.values[static_cast<size_t>(normal[1].first)]);
        // mirrors the energy-gradient assembly, with the extra face density
        const double scale = wf * vol * rho_f;
        for (const auto& [c, w] : normal) update[static_cast<size_t>(c)] += scale * fh.flux[axis] * w;
        if (f.dim == 2) {
            const int taxis = 1 - axis;
            for (const auto& [c, w] : tang) update[static_cast<size_t>(c)] += scale * fh.flux[taxis] * w;
        }
    });
    for (int c = 0; c < n; ++c)
        f.values[static_cast<size_t>(c)] += dt * update[static_cast<size_t>(c)] / f.cell_mass(c);
}

// dissipation integral -int { H(-d log rho) + L(grad[-log rho]) } d(rho m)
// with centered cell gradients
inline double entropy_dissipation_integral(const ChartHamiltonian& H, const GridField& f) {
    double s = 0.0;
    for (int i = 0; i < f.shape[0]; ++i)
        for (int j = 0; j < (f.dim == 2 ? f.shape[1] : 1); ++j) {
            const int c = f.idx(i, j);
            VectorXd g(f.dim);
            g[0] = -(std::log(f.values[static_cast<size_t>(f.idx(i + 1, j))]) -
                     std::log(f.values[static_cast<size_t>(f.idx(i - 1, j))])) /
                   (2.0 * f.h);
            if (f.dim == 2)
                g[1] = -(std::log(f.values[static_cast<size_t>(f.idx(i, j + 1))]) -
                         std::log(f.values[static_cast<size_t>(f.idx(i, j - 1))])) /
                       (2.0 * f.h);
            if (g.norm() < 1e-14) continue;
            HamJet hj = H.at(f.coord(i, j), g, 1);
            const double lag = g.dot(hj.grad_a()) - hj.value();  // L(grad) by Fenchel equality
            s -= (hj.value() + lag) * f.values[static_cast<size_t>(c)] * f.cell_mass(c);
        }
    return s;
}

inline HeatResult entropy_flow_solve(const ChartHamiltonian& H, const GridField& rho0, double T, double dt,
                                     int diag_every = 64, double rho_min = 1e-10) {
    HeatResult r{rho0, {}};
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
    auto record = [&](double t) {
        r.diag.times.push_back(t);
        r.diag.mass.push_back(r.field.integral());
        double ent = 0.0;
        for (int c = 0; c < r.field.cells(); ++c) {
            const double rho = r.field.values[static_cast<size_t>(c)];
            if (rho > 0.0) ent += rho * std::log(rho) * r.field.cell_mass(c);
        }
        r.diag.entropy.push_back(ent);
        r.diag.energy.push_back(dirichlet_energy_flux(H, r.field));
        r.diag.slope.push_back(-entropy_dissipation_integral(H, r.field));
    };
    record(0.0);
    for (int s = 0; s < steps; ++s) {
        entropy_flow_step(H, r.field, std::min(dt, T - s * dt), rho_min);
        if ((s + 1) % diag_every == 0 || s + 1 == steps) record(std::min((s + 1) * dt, T));
    }
    return r;
}

// --- Dirichlet problem -----------------------------------------------------------

// minimize the face energy over interior cells with boundary values fixed
inline GridField dirichlet_harmonic(const ChartHamiltonian& H, const GridField& init,
                                    const std::vector<bool>& boundary_mask, double grad_tol = 1e-9,
                                    int max_iter = 400) {
    if (init.periodic) throw Error("Dirichlet problem needs a box grid");
    const int n = init.cells();
    if (static_cast<int>(boundary_mask.size()) != n) throw Error("boundary mask size mismatch");
    std::vector<int> free_cells;
    for (int c = 0; c < n; ++c)
        if (!boundary_mask[static_cast<size_t>(c)]) free_cells.push_back(c);
    if (free_cells.empty() || free_cells.size() == static_cast<size_t>(n))
        throw Error("boundary mask must pin some cells and free others");
    GridField work = init;
    auto fg = [&](const VectorXd& x, VectorXd& g) {
        for (size_t k = 0; k < free_cells.size(); ++k)
            work.values[static_cast<size_t>(free_cells[k])] = x[static_cast<Eigen::Index>(k)];
        std::vector<double> eg = energy_gradient_flux(H, work);
        for (size_t k = 0; k < free_cells.size(); ++k)
            g[static_cast<Eigen::Index>(k)] = eg[static_cast<size_t>(free_cells[k])];
        return dirichlet_energy_flux(H, work);
    };
    // interior flux-Laplacian residual (max norm)
    auto residual = [&](const VectorXd& g) {
        double res = 0.0;
        for (size_t k = 0; k < free_cells.size(); ++k)
            res = std::max(res, std::abs(g[static_cast<Eigen::Index>(k)] / work.cell_mass(free_cells[k])));
        return res;
    };
    const Eigen::Index nf = static_cast<Eigen::Index>(free_cells.size());
    VectorXd x(nf);
    for (size_t k = 0; k < free_cells.size(); ++k)
        x[static_cast<Eigen::Index>(k)] = init.values[static_cast<size_t>(free_cells[k])];
    detail::lbfgs_minimize(x, fg, [&](const VectorXd& g) { return residual(g) <= 1e4 * grad_tol; },
                           max_iter);
    VectorXd g(nf);
    for (int it = 0; it < 30; ++it) {
        fg(x, g);
        if (residual(g) <= 0.1 * grad_tol) break;
        MatrixXd full = energy_hessian_flux(H, work);
        MatrixXd Hs(nf, nf);
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b)
                Hs(a, b) = full(free_cells[static_cast<size_t>(a)], free_cells[static_cast<size_t>(b)]);
        const double ridge = std::max(1e-14, 1e-12 * Hs.trace() / static_cast<double>(nf));
        Hs += ridge * MatrixXd::Identity(nf, nf);
        Eigen::LLT<MatrixXd> llt(Hs);
        if (llt.info() != Eigen::Success) {
            Hs += 1e-6 * Hs.trace() / static_cast<double>(nf) * MatrixXd::Identity(nf, nf);
            llt.compute(Hs);
        }
        x -= llt.solve(g);
    }
    fg(x, g);
    if (residual(g) > grad_tol * 10.0)
        throw Error("inner solve failed: residual " + std::to_string(residual(g)));
    return work;
}

// --- CSV / binary dumps ------------------------------------------------------------

inline void write_diagnostics_csv(const std::string& path, const FlowDiagnostics& d) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out.precision(17);
    out << "t,mass,energy,entropy,slope\n";
    for (size_t k = 0; k < d.times.size(); ++k)
        out << d.times[k] << ',' << d.mass[k] << ',' << d.energy[k] << ',' << d.entropy[k] << ','
            << d.slope[k] << '\n';
}

// flat binary of doubles plus a JSON sidecar carrying shape, spacing, weight
inline void write_field_dump(const std::string& prefix, const GridField& f) {
    {
        std::ofstream bin(prefix + ".bin", std::ios::binary);
        if (!bin) throw Error("cannot open " + prefix + ".bin");
        bin.write(reinterpret_cast<const char*>(f.values.data()),
                  static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    }
    nlohmann::json side;
    side["dim"] = f.dim;
    side["shape"] = {f.shape[0], f.shape[1]};
    side["spacing"] = f.h;
    side["origin"] = {f.origin[0], f.origin[1]};
    side["periodic"] = f.periodic;
    side["weight"] = f.sigma;
    std::ofstream js(prefix + ".json");
    js << side.dump(2) << '\n';
}

inline GridField read_field_dump(const std::string& prefix) {
    std::ifstream js(prefix + ".json");
    if (!js) throw Error("cannot open " + prefix + ".json");
    nlohmann::json side;
    js >> side;
    GridField f;
    f.dim = side.at("dim").get<int>();
    f.shape = {side.at("shape")[0].get<int>(), side.at("shape")[1].get<int>()};
    f.h = side.at("spacing").get<double>();
    f.origin = {side.at("origin")[0].get<double>(), side.at("origin")[1].get<double>()};
    f.periodic = side.at("periodic").get<bool>();
    f.sigma = side.at("weight").get<std::vector<double>>();
    f.values.assign(static_cast<size_t>(f.cells()), 0.0);
    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw Error("cannot open " + prefix + ".bin");
    bin.read(reinterpret_cast<char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    return f;
}

}  // namespace hamflow
