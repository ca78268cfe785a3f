#pragma once

// Canonical frames along Hamiltonian trajectories, the curvature operator
// R^t(e_i) = -e_i'' on the Jacobi curve, Ricci and weighted Ricci curvature,
// and the coordinate cross-check formula.
//
// Construction recipe: a vertical frame xi(t) orthonormal for the inner
// product <xi, zeta> = xi^T H_{aa} zeta is pulled back through the flow
// linearization, ebar_i = J(t)^{-1} xi_i, then straightened by the
// orthogonal gauge O' = (1/2) O Omega with Omega_ij = omega(ebar_i', ebar_j').

#include <cmath>
#include <vector>

#include "hamflow/flow.hpp"

namespace hamflow {

// columns xi_i with xi^T H_{aa} xi = I, fixed by the lower-triangular
// square root (deterministic gauge, continuous in t)
inline MatrixXd vertical_frame_at(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& alpha) {
    Eigen::LLT<MatrixXd> llt(H.at(x, alpha, 2).haa());
    if (llt.info() != Eigen::Success) throw Error("strong convexity violated along trajectory");
    const MatrixXd L = llt.matrixL();
    return L.transpose().triangularView<Eigen::Upper>().solve(
        MatrixXd::Identity(H.dim(), H.dim()));
}

namespace detail {

// componentwise Richardson first derivative on an equispaced matrix sequence
inline MatrixXd matrix_d1_grid(const std::vector<MatrixXd>& seq, int k, double dt) {
    MatrixXd out = MatrixXd::Zero(seq[static_cast<size_t>(k)].rows(), seq[static_cast<size_t>(k)].cols());
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) {
            auto g = [&](double t) {
                const int idx = k + static_cast<int>(std::lround(t / dt));
                return seq[static_cast<size_t>(idx)](r, c);
            };
            out(r, c) = curve_derivatives(g, 0.0, 1, dt).d1;
        }
    return out;
}

inline MatrixXd matrix_d2_grid(const std::vector<MatrixXd>& seq, int k, double dt) {
    MatrixXd out = MatrixXd::Zero(seq[static_cast<size_t>(k)].rows(), seq[static_cast<size_t>(k)].cols());
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) {
            auto g = [&](double t) {
                const int idx = k + static_cast<int>(std::lround(t / dt));
                return seq[static_cast<size_t>(idx)](r, c);
            };
            out(r, c) = curve_derivatives(g, 0.0, 2, dt).d2;
        }
    return out;
}

}  // namespace detail

struct FrameOptions {
    double dt = 1.0 / 512.0;  // coarse grid step
    double tol_frame = 1e-7;
    MatrixXd gauge;           // optional constant orthogonal rotation of xi
    FlowOptions flow;
};

struct FrameBundle {
    double dt = 0.0;
    int center = 0;
    std::vector<double> times;
    std::vector<VectorXd> x, alpha;
    std::vector<MatrixXd> jac;       // dPhi_t at coarse nodes
    std::vector<MatrixXd> xi;        // n x n vertical frames (columns)
    std::vector<MatrixXd> ebar;      // 2n x n, ebar_i = J^{-1} xi_i
    std::vector<MatrixXd> ebardot;   // 2n x n
    std::vector<MatrixXd> Omega;     // n x n
    std::vector<MatrixXd> O;         // orthogonal gauge, O(center) = I
    std::vector<MatrixXd> e;         // canonical frame, columns e_i
    std::vector<MatrixXd> edot;

    double frame_defect = 0.0;     // max |omega(e_i', e_j) - delta_ij|
    double lagrange_defect = 0.0;  // max |omega(e_i, e_j)|
    double orth_defect = 0.0;      // max |O O^T - I|

    int size() const { return static_cast<int>(times.size()); }
    int index_at(double t) const {
        const int k = center + static_cast<int>(std::lround(t / dt));
        if (k < 0 || k >= size()) throw Error("time outside frame bundle");
        return k;
    }
};

// Build a canonical frame along Phi_t(state0) for t in [tmin, tmax]
// (coarse step opts.dt; t = 0 must lie inside). The gauge is O(0) = I with
// xi the triangular-square-root vertical frame, so the frame at t = 0 is
// the deterministic chol gauge.
inline FrameBundle canonical_frame(const ChartHamiltonian& H, const CotangentState& state0, double tmin,
                                   double tmax, FrameOptions opts = {}) {
    if (state0.alpha.norm() == 0.0) throw Error("canonical frame needs alpha != 0");
    const int n = H.dim();
    const double dt = opts.dt;
    const double dtf = 0.5 * dt;

    // trajectory on the fine grid, two coarse steps of margin for the
    // xi-derivative stencil
    FlowOptions fopts = opts.flow;
    fopts.jacobians = true;
    fopts.dt = dtf;
    FlowTrajectory tr = flow_window(H, state0, tmin - 2.0 * dt, tmax + 2.0 * dt, fopts);

    const int fn = tr.size();
    std::vector<MatrixXd> xi_f(static_cast<size_t>(fn)), dxh_f(static_cast<size_t>(fn));
    const bool rotate = opts.gauge.rows() == n;
    for (int k = 0; k < fn; ++k) {
        xi_f[static_cast<size_t>(k)] = vertical_frame_at(H, tr.x[static_cast<size_t>(k)], tr.alpha[static_cast<size_t>(k)]);
        if (rotate) xi_f[static_cast<size_t>(k)] = xi_f[static_cast<size_t>(k)] * opts.gauge.transpose();
        HamJet j = H.at(tr.x[static_cast<size_t>(k)], tr.alpha[static_cast<size_t>(k)], 2);
        const MatrixXd hxa = j.hxa();
        MatrixXd dxh(2 * n, 2 * n);
        dxh.topLeftCorner(n, n) = hxa.transpose();
        dxh.topRightCorner(n, n) = j.haa();
        dxh.bottomLeftCorner(n, n) = -j.hxx();
        dxh.bottomRightCorner(n, n) = -hxa;
        dxh_f[static_cast<size_t>(k)] = dxh;
    }

    // ebar' = J^{-1} (xi' - DX_H xi) on the fine grid, then Omega
    std::vector<MatrixXd> ebar_f(static_cast<size_t>(fn)), ebardot_f(static_cast<size_t>(fn)),
        omega_f(static_cast<size_t>(fn));
    auto embed_vertical = [n](const MatrixXd& m) {
        MatrixXd v = MatrixXd::Zero(2 * n, m.cols());
        v.bottomRows(n) = m;
        return v;
    };
    for (int k = 4; k < fn - 4; ++k) {
        const MatrixXd xid = detail::matrix_d1_grid(xi_f, k, dtf);
        Eigen::PartialPivLU<MatrixXd> lu(tr.jac[static_cast<size_t>(k)]);
        const MatrixXd xv = embed_vertical(xi_f[static_cast<size_t>(k)]);
        ebar_f[static_cast<size_t>(k)] = lu.solve(xv);
        ebardot_f[static_cast<size_t>(k)] =
            lu.solve(embed_vertical(xid) - dxh_f[static_cast<size_t>(k)] * xv);
        MatrixXd om(n, n);
        for (int i = 0; i < n; ++i)
            for (int j2 = 0; j2 < n; ++j2)
                om(i, j2) = omega_pair(ebardot_f[static_cast<size_t>(k)].col(i),
                                       ebardot_f[static_cast<size_t>(k)].col(j2));
        omega_f[static_cast<size_t>(k)] = om;
    }

    // coarse bundle: fine indices sharing the parity of tr.center, with the
    // 4-node fine margin needed by the xi-derivative stencil
    FrameBundle fb;
    fb.dt = dt;
    int kf_lo = 4 + ((tr.center - 4) % 2 + 2) % 2;
    int kf_hi = fn - 5;
    if ((kf_hi - tr.center) % 2 != 0) --kf_hi;
    const int count = (kf_hi - kf_lo) / 2 + 1;
    auto fine_of = [kf_lo](int j) { return kf_lo + 2 * j; };
    fb.times.resize(static_cast<size_t>(count));
    fb.center = (tr.center - kf_lo) / 2;
    fb.x.resize(static_cast<size_t>(count));
    fb.alpha.resize(static_cast<size_t>(count));
    fb.jac.resize(static_cast<size_t>(count));
    fb.xi.resize(static_cast<size_t>(count));
    fb.ebar.resize(static_cast<size_t>(count));
    fb.ebardot.resize(static_cast<size_t>(count));
    fb.Omega.resize(static_cast<size_t>(count));
    fb.O.resize(static_cast<size_t>(count));
    fb.e.resize(static_cast<size_t>(count));
    fb.edot.resize(static_cast<size_t>(count));
    for (int j = 0; j < count; ++j) {
        const int kf = fine_of(j);
        fb.times[static_cast<size_t>(j)] = tr.times[static_cast<size_t>(kf)];
        fb.x[static_cast<size_t>(j)] = tr.x[static_cast<size_t>(kf)];
        fb.alpha[static_cast<size_t>(j)] = tr.alpha[static_cast<size_t>(kf)];
        fb.jac[static_cast<size_t>(j)] = tr.jac[static_cast<size_t>(kf)];
        fb.xi[static_cast<size_t>(j)] = xi_f[static_cast<size_t>(kf)];
        fb.ebar[static_cast<size_t>(j)] = ebar_f[static_cast<size_t>(kf)];
        fb.ebardot[static_cast<size_t>(j)] = ebardot_f[static_cast<size_t>(kf)];
        fb.Omega[static_cast<size_t>(j)] = omega_f[static_cast<size_t>(kf)];
    }

    // gauge ODE O' = (1/2) O Omega by RK4 on coarse steps; the fine grid
    // supplies the midpoint Omegas exactly
    auto omega_at_fine = [&](int kf) -> const MatrixXd& { return omega_f[static_cast<size_t>(kf)]; };
    auto rk4_gauge = [&](const MatrixXd& O0, int kf_from, int dir) {
        const double h = dir * dt;
        const MatrixXd& W1 = omega_at_fine(kf_from);
        const MatrixXd& W2 = omega_at_fine(kf_from + dir);
        const MatrixXd& W3 = omega_at_fine(kf_from + 2 * dir);
        const MatrixXd K1 = 0.5 * O0 * W1;
        const MatrixXd K2 = 0.5 * (O0 + 0.5 * h * K1) * W2;
        const MatrixXd K3 = 0.5 * (O0 + 0.5 * h * K2) * W2;
        const MatrixXd K4 = 0.5 * (O0 + h * K3) * W3;
        return MatrixXd(O0 + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4));
    };
    fb.O[static_cast<size_t>(fb.center)] = MatrixXd::Identity(n, n);
    for (int j = fb.center + 1; j < count; ++j)
        fb.O[static_cast<size_t>(j)] = rk4_gauge(fb.O[static_cast<size_t>(j - 1)], fine_of(j - 1), +1);
    for (int j = fb.center - 1; j >= 0; --j)
        fb.O[static_cast<size_t>(j)] = rk4_gauge(fb.O[static_cast<size_t>(j + 1)], fine_of(j + 1), -1);

    for (int j = 0; j < count; ++j) {
        const MatrixXd& O = fb.O[static_cast<size_t>(j)];
        fb.e[static_cast<size_t>(j)] = fb.ebar[static_cast<size_t>(j)] * O.transpose();
        fb.edot[static_cast<size_t>(j)] =
            fb.ebardot[static_cast<size_t>(j)] * O.transpose() +
            0.5 * fb.ebar[static_cast<size_t>(j)] * fb.Omega[static_cast<size_t>(j)].transpose() * O.transpose();
        fb.orth_defect = std::max(fb.orth_defect,
                                  (O * O.transpose() - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l) {
                const double pair_de = omega_pair(fb.edot[static_cast<size_t>(j)].col(i),
                                                  fb.e[static_cast<size_t>(j)].col(l));
                const double pair_ee = omega_pair(fb.e[static_cast<size_t>(j)].col(i),
                                                  fb.e[static_cast<size_t>(j)].col(l));
                fb.frame_defect = std::max(fb.frame_defect, std::abs(pair_de - (i == l ? 1.0 : 0.0)));
                fb.lagrange_defect = std::max(fb.lagrange_defect, std::abs(pair_ee));
            }
    }
    if (fb.frame_defect > opts.tol_frame || fb.orth_defect > opts.tol_frame)
        throw Error("canonical frame construction failed: defect " + std::to_string(fb.frame_defect));
    return fb;
}

enum class CurvatureRoute { FrameSecondDerivative, CoordinateFormula };

struct CurvatureReport {
    MatrixXd R;            // matrix of R^t in the canonical frame
    double ric = 0.0;      // trace
    CurvatureRoute route = CurvatureRoute::FrameSecondDerivative;
    double sym_defect = 0.0;
    double vertical_defect = 0.0;  // size of the edot-component of e''
    double solve_residual = 0.0;
};

// R at a coarse node (needs 4 nodes of margin): R_ij from -e_i'' expanded in
// the (e, e') basis; the e'-components measure the R e_i in J^t defect.
inline CurvatureReport curvature_operator(const FrameBundle& fb, int node) {
    const int n = static_cast<int>(fb.xi[0].rows());
    if (node < 4 || node + 4 >= fb.size()) throw Error("curvature node needs 4 nodes of margin");
    const MatrixXd eddot = detail::matrix_d2_grid(fb.e, node, fb.dt);
    MatrixXd basis(2 * n, 2 * n);
    basis.leftCols(n) = fb.e[static_cast<size_t>(node)];
    basis.rightCols(n) = fb.edot[static_cast<size_t>(node)];
    Eigen::FullPivLU<MatrixXd> lu(basis);
    if (!lu.isInvertible()) throw Error("curvature extraction ill-conditioned");
    CurvatureReport rep;
    rep.R.resize(n, n);
    for (int i = 0; i < n; ++i) {
        const VectorXd rhs = -eddot.col(i);
        const VectorXd z = lu.solve(rhs);
        rep.R.row(i) = z.head(n).transpose();
        rep.vertical_defect = std::max(rep.vertical_defect, z.tail(n).cwiseAbs().maxCoeff());
        rep.solve_residual = std::max(rep.solve_residual, (basis * z - rhs).cwiseAbs().maxCoeff());
    }
    rep.ric = rep.R.trace();
    rep.sym_defect = (rep.R - rep.R.transpose()).cwiseAbs().maxCoeff();
    rep.route = CurvatureRoute::FrameSecondDerivative;
    return rep;
}

// R^0_alpha extracted at the center of a short symmetric window.
inline CurvatureReport curvature_at(const ChartHamiltonian& H, const CotangentState& state,
                                    FrameOptions opts = {}) {
    const double w = 8.0 * opts.dt;
    FrameBundle fb = canonical_frame(H, state, -w, w, opts);
    return curvature_operator(fb, fb.center);
}

// trace of R^0_alpha; 0 by convention on the zero section
inline double ricci(const ChartHamiltonian& H, const CotangentState& state, FrameOptions opts = {}) {
    if (state.alpha.norm() == 0.0) return 0.0;
    return curvature_at(H, state, opts).ric;
}

// psi(t) = varsigma(eta(t)) + (1/2) log det L_{vv}(eta'(t))
//        = varsigma(eta(t)) - (1/2) log det H_{aa}(alpha(t))
inline std::vector<double> weight_psi_along(const ChartHamiltonian& H, const WeightField& w,
                                            const FrameBundle& fb) {
    std::vector<double> psi(static_cast<size_t>(fb.size()));
    for (int k = 0; k < fb.size(); ++k) {
        const double s = w.at(fb.x[static_cast<size_t>(k)], 0).value();
        Eigen::LLT<MatrixXd> llt(H.at(fb.x[static_cast<size_t>(k)], fb.alpha[static_cast<size_t>(k)], 2).haa());
        if (llt.info() != Eigen::Success) throw Error("strong convexity violated along trajectory");
        double logdet = 0.0;
        const MatrixXd L = llt.matrixL();
        for (int i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
        psi[static_cast<size_t>(k)] = s - 0.5 * logdet;
    }
    return psi;
}

struct WeightedRicci {
    double value = 0.0;        // Ric_N; -inf encoded by minus_inf
    bool minus_inf = false;
    double ric = 0.0;          // unweighted trace
    double psi_d1 = 0.0;
    double psi_d2 = 0.0;
};

inline WeightedRicci weighted_ricci(const ChartHamiltonian& H, const WeightField& w,
                                    const CotangentState& state, double N, FrameOptions opts = {}) {
    const int n = H.dim();
    if (!(N >= n)) throw Error("effective dimension N must be >= n");
    WeightedRicci out;
    if (state.alpha.norm() == 0.0) return out;  // zero-section convention
    const double win = 8.0 * opts.dt;
    FrameBundle fb = canonical_frame(H, state, -win, win, opts);
    CurvatureReport rep = curvature_operator(fb, fb.center);
    const std::vector<double> psi = weight_psi_along(H, w, fb);
    CurveDerivs d = curve_derivatives_grid(psi, fb.center, fb.dt);
    out.ric = rep.ric;
    out.psi_d1 = d.d1;
    out.psi_d2 = d.d2;
    const bool inf_N = std::isinf(N);
    if (inf_N) {
        out.value = rep.ric + d.d2;
    } else if (N > n) {
        out.value = rep.ric + d.d2 - d.d1 * d.d1 / (N - n);
    } else {  // N == n
        if (std::abs(d.d1) > 1e-7) {
            out.minus_inf = true;
            out.value = -std::numeric_limits<double>::infinity();
        } else {
            out.value = rep.ric + d.d2;
        }
    }
    return out;
}

// --- coordinate formula (adapted charts with H_{aa} = I along the flow) ------

inline CurvatureReport curvature_coordinate_formula(const ChartHamiltonian& H, const CotangentState& state,
                                                    double precondition_tol = 1e-8) {
    const int n = H.dim();
    // the route is only valid when H_{aa} = I holds along the trajectory
    FlowOptions fopts;
    FlowTrajectory tr = flow_window(H, state, -1.0 / 64.0, 1.0 / 64.0, fopts);
    for (int k = 0; k < tr.size(); k += std::max(1, tr.size() / 16)) {
        const MatrixXd haa = H.at(tr.x[static_cast<size_t>(k)], tr.alpha[static_cast<size_t>(k)], 2).haa();
        if ((haa - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > precondition_tol)
            throw Error("coordinate formula inapplicable");
    }
    HamJet j = H.at(state.x, state.alpha, 3);
    // flow derivative of H_{x^i a_j} by the chain rule
    auto hxa_dot = [&](int i, int jj) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += j.Hxxa(i, k, jj) * j.Ha(k) - j.Hxaa(i, jj, k) * j.Hx(k);
        return s;
    };
    CurvatureReport rep;
    rep.route = CurvatureRoute::CoordinateFormula;
    rep.R.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj) {
            double quad = 0.0, cross = 0.0;
            for (int k = 0; k < n; ++k) {
                quad += (j.Hxa(i, k) - j.Hxa(k, i)) * (j.Hxa(jj, k) - j.Hxa(k, jj));
                cross += j.Hxa(i, k) * j.Hxa(jj, k);
            }
            rep.R(i, jj) = 0.25 * quad - 0.5 * (hxa_dot(i, jj) + hxa_dot(jj, i)) - cross + j.Hxx(i, jj);
        }
    rep.ric = rep.R.trace();
    rep.sym_defect = (rep.R - rep.R.transpose()).cwiseAbs().maxCoeff();
    return rep;
}

// --- convex deformation scaling ----------------------------------------------

struct ScalingCheck {
    double lhs = 0.0;   // Ric (or Ric_N) of h(F*)
    double rhs = 0.0;   // c(alpha)^2 times the base Finsler value
    double defect = 0.0;
    double rel_defect = 0.0;
    double c = 0.0;     // h'(F*(alpha)) / F*(alpha)
};

inline double fstar_value(const FinslerDual& F, const CotangentState& s) {
    std::vector<double> pt(static_cast<size_t>(2 * F.n));
    for (int i = 0; i < F.n; ++i) {
        pt[static_cast<size_t>(i)] = s.x[i];
        pt[static_cast<size_t>(F.n + i)] = s.alpha[i];
    }
    return jet_eval(F.fstar, pt, 0).value();
}

inline ScalingCheck fconv_scaling_check(const FinslerDual& F, const ConvexProfile& h,
                                        const CotangentState& state, FrameOptions opts = {}) {
    ChartHamiltonian Hdef = deformation(h, F);
    ChartHamiltonian Hfin = finsler_quadratic(F);
    ScalingCheck out;
    const double fs = fstar_value(F, state);
    out.c = h.d1(fs) / fs;
    out.lhs = ricci(Hdef, state, opts);
    out.rhs = out.c * out.c * ricci(Hfin, state, opts);
    out.defect = std::abs(out.lhs - out.rhs);
    out.rel_defect = out.defect / std::max(1e-12, std::abs(out.rhs));
    return out;
}

inline ScalingCheck fconv_scaling_check_weighted(const FinslerDual& F, const ConvexProfile& h,
                                                 const WeightField& w, const CotangentState& state,
                                                 double N, FrameOptions opts = {}) {
    ChartHamiltonian Hdef = deformation(h, F);
    ChartHamiltonian Hfin = finsler_quadratic(F);
    ScalingCheck out;
    const double fs = fstar_value(F, state);
    out.c = h.d1(fs) / fs;
    WeightedRicci a = weighted_ricci(Hdef, w, state, N, opts);
    WeightedRicci b = weighted_ricci(Hfin, w, state, N, opts);
    if (a.minus_inf || b.minus_inf) {
        out.lhs = a.value;
        out.rhs = b.value;
        out.defect = (a.minus_inf == b.minus_inf) ? 0.0 : std::numeric_limits<double>::infinity();
        return out;
    }
    out.lhs = a.value;
    out.rhs = out.c * out.c * b.value;
    out.defect = std::abs(out.lhs - out.rhs);
    out.rel_defect = out.defect / std::max(1e-12, std::abs(out.rhs));
    return out;
}

}  // namespace hamflow
