#pragma once

// Dynamic identities along Hamilton-Jacobi characteristics: the matrix
// Riccati equation, the Bochner-Weitzenbock identity and its N-form, the
// model function s_{K,N} with the Laplacian comparison bound, and the
// measure-contraction ratio test.

#include <functional>
#include <vector>

#include "hamflow/frames.hpp"
#include "hamflow/laplacian.hpp"

namespace hamflow {

// --- model functions -----------------------------------------------------------

// sqrt(N/K) sin(sqrt(K/N) t) / t / sqrt(-N/K) sinh(sqrt(-K/N) t)
inline double s_KN(double K, double N, double t) {
    if (t < 0.0) throw Error("model function needs t >= 0");
    if (K > 0.0) {
        const double w = std::sqrt(K / N);
        if (t >= M_PI / w) throw Error("past model focal time");
        return std::sin(w * t) / w;
    }
    if (K == 0.0) return t;
    const double w = std::sqrt(-K / N);
    return std::sinh(w * t) / w;
}

inline double s_KN_prime(double K, double N, double t) {
    if (K > 0.0) return std::cos(std::sqrt(K / N) * t);
    if (K == 0.0) return 1.0;
    return std::cosh(std::sqrt(-K / N) * t);
}

// comparison bound N s'_{K,N}/s_{K,N}
inline double s_KN_bound(double K, double N, double t) {
    return N * s_KN_prime(K, N, t) / s_KN(K, N, t);
}

// --- Hamilton-Jacobi transport of (du, Hess, Laplacian) -------------------------

struct RiccatiState {
    double t = 0.0;
    MatrixXd A, B;
    MatrixXd hess;      // -B^{-1} A, in the transported canonical frame
    double trace_lap = 0.0;  // Delta^H_m u_t(eta(t)) = tr hess - (psi o eta)'
};

struct HjEvolution {
    std::vector<RiccatiState> states;
    FrameBundle bundle;          // canonical frame along the characteristic
    std::vector<double> psi;     // psi(eta(t)) at bundle nodes
    std::vector<MatrixXd> R;     // curvature matrices at bundle nodes (where defined)
    int r_lo = 0;                // first bundle node with R available
    VectorXd du0;
    MatrixXd uxx0;
};

namespace detail {

inline MatrixXd hess_from_AB(const MatrixXd& A, const MatrixXd& B, double t) {
    Eigen::FullPivLU<MatrixXd> lu(B);
    if (!lu.isInvertible() || lu.rcond() < 1e-13)
        throw Error("Riccati blow-up at t = " + std::to_string(t));
    return -lu.solve(A);
}

}  // namespace detail

// Evolve the characteristic Phi_t(du_{x0}) together with the matrix pair
//   B' = -A,  A' = B R(t),  A(0) = -Hess^H u(x0),  B(0) = I,
// reporting Hess^H u_t(eta(t)) = -B^{-1} A and its weighted trace.
inline HjEvolution hj_transport(const ChartHamiltonian& H, const WeightField& w, const ScalarField& u,
                                const VectorXd& x0, double T, FrameOptions opts = {}) {
    const int n = H.dim();
    Jet uj = scalar_at(u, x0, 2);
    VectorXd du(n);
    MatrixXd uxx(n, n);
    for (int i = 0; i < n; ++i) {
        du[i] = uj.d(i);
        for (int j = 0; j < n; ++j) uxx(i, j) = uj.d2(i, j);
    }
    if (du.norm() == 0.0) throw Error("Hamilton-Jacobi transport needs du != 0");

    HjEvolution ev;
    const double margin = 8.0 * opts.dt;
    ev.bundle = canonical_frame(H, {x0, du}, -margin, T + margin, opts);
    ev.psi = weight_psi_along(H, w, ev.bundle);
    ev.du0 = du;
    ev.uxx0 = uxx;

    // curvature matrices wherever the stencil fits
    ev.r_lo = 4;
    ev.R.assign(static_cast<size_t>(ev.bundle.size()), MatrixXd());
    for (int k = 4; k + 4 < ev.bundle.size(); ++k)
        ev.R[static_cast<size_t>(k)] = curvature_operator(ev.bundle, k).R;

    HessianH h0 = hessian_H_data(H, x0, du, uxx);
    MatrixXd A = -h0.matrix;
    MatrixXd B = MatrixXd::Identity(n, n);
    const double hs = 2.0 * ev.bundle.dt;
    const int steps = static_cast<int>(std::floor(T / hs + 1e-9));
    const int c = ev.bundle.center;

    auto psi_d1 = [&](int node) { return curve_derivatives_grid(ev.psi, node, ev.bundle.dt).d1; };
    auto push_state = [&](double t, const MatrixXd& Ak, const MatrixXd& Bk, int node) {
        RiccatiState st;
        st.t = t;
        st.A = Ak;
        st.B = Bk;
        st.hess = detail::hess_from_AB(Ak, Bk, t);
        st.trace_lap = st.hess.trace() - psi_d1(node);
        ev.states.push_back(std::move(st));
    };
    push_state(0.0, A, B, c);
    for (int s = 0; s < steps; ++s) {
        const MatrixXd& R1 = ev.R[static_cast<size_t>(c + 2 * s)];
        const MatrixXd& R2 = ev.R[static_cast<size_t>(c + 2 * s + 1)];
        const MatrixXd& R3 = ev.R[static_cast<size_t>(c + 2 * s + 2)];
        // RK4 on Y = (A, B)
        auto f = [](const MatrixXd& Ak, const MatrixXd& Bk, const MatrixXd& R) {
            return std::pair<MatrixXd, MatrixXd>(Bk * R, -Ak);
        };
        auto [ka1, kb1] = f(A, B, R1);
        auto [ka2, kb2] = f(A + 0.5 * hs * ka1, B + 0.5 * hs * kb1, R2);
        auto [ka3, kb3] = f(A + 0.5 * hs * ka2, B + 0.5 * hs * kb2, R2);
        auto [ka4, kb4] = f(A + hs * ka3, B + hs * kb3, R3);
        A += (hs / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
        B += (hs / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
        push_state((s + 1) * hs, A, B, c + 2 * (s + 1));
    }
    return ev;
}

// Hessian of the Hamilton-Jacobi solution at eta(t) by the method of
// characteristics: push the graph of d(du)_{x0} through dPhi_t, then apply
// the pointwise normalization. Reported in the chol gauge at alpha(t).
inline MatrixXd hj_pointwise_hessian(const ChartHamiltonian& H, const HjEvolution& ev, int node) {
    const int n = H.dim();
    const MatrixXd& J = ev.bundle.jac[static_cast<size_t>(node)];
    MatrixXd graph(2 * n, n);
    graph.topRows(n) = MatrixXd::Identity(n, n);
    graph.bottomRows(n) = ev.uxx0;
    const MatrixXd W = J * graph;
    const MatrixXd X = W.topRows(n);
    const MatrixXd P = W.bottomRows(n);
    Eigen::FullPivLU<MatrixXd> lu(X);
    if (!lu.isInvertible()) throw Error("Riccati blow-up at t = " + std::to_string(ev.bundle.times[static_cast<size_t>(node)]));
    MatrixXd uxx_t = P * lu.inverse();
    uxx_t = 0.5 * (uxx_t + uxx_t.transpose());
    return hessian_H_data(H, ev.bundle.x[static_cast<size_t>(node)], ev.bundle.alpha[static_cast<size_t>(node)], uxx_t)
        .matrix;
}

struct RiccatiResidual {
    double matrix_residual = 0.0;  // eq. of motion of Hess, matrix norm
    double trace_residual = 0.0;   // weighted trace equation with Ric_infinity
};

// Residuals of the matrix Riccati equation and its weighted trace, with the
// Hessian curve recomputed independently of the (A, B) evolution.
inline RiccatiResidual riccati_residual(const ChartHamiltonian& H, const WeightField& w,
                                        const ScalarField& u, const VectorXd& x0, double T,
                                        FrameOptions opts = {}) {
    HjEvolution ev = hj_transport(H, w, u, x0, T, opts);
    const FrameBundle& fb = ev.bundle;
    const int lo = std::max(8, fb.center - 8);
    const int hi = std::min(fb.size() - 9, fb.index_at(T));

    std::vector<MatrixXd> hess_pw(static_cast<size_t>(fb.size()));
    std::vector<double> trace_lap(static_cast<size_t>(fb.size()), 0.0);
    for (int k = lo - 4; k <= hi + 4; ++k) {
        const MatrixXd m = hj_pointwise_hessian(H, ev, k);
        // in-bundle gauge for the matrix equation
        const MatrixXd& O = fb.O[static_cast<size_t>(k)];
        hess_pw[static_cast<size_t>(k)] = O * m * O.transpose();
        trace_lap[static_cast<size_t>(k)] = m.trace() - curve_derivatives_grid(ev.psi, k, fb.dt).d1;
    }
    RiccatiResidual out;
    for (int k = lo; k <= hi; k += 4) {
        const MatrixXd dH = detail::matrix_d1_grid(hess_pw, k, fb.dt);
        const MatrixXd& Hk = hess_pw[static_cast<size_t>(k)];
        const MatrixXd res = dH + Hk * Hk + ev.R[static_cast<size_t>(k)];
        out.matrix_residual = std::max(out.matrix_residual, res.cwiseAbs().maxCoeff());

        auto g = [&](double t) {
            const int idx = k + static_cast<int>(std::lround(t / fb.dt));
            return trace_lap[static_cast<size_t>(idx)];
        };
        const double dtr = curve_derivatives(g, 0.0, 1, fb.dt).d1;
        CurveDerivs psid = curve_derivatives_grid(ev.psi, k, fb.dt);
        const double ric_inf = ev.R[static_cast<size_t>(k)].trace() + psid.d2;
        const MatrixXd m_pw = fb.O[static_cast<size_t>(k)].transpose() * Hk * fb.O[static_cast<size_t>(k)];
        const double tres = dtr + m_pw.squaredNorm() + ric_inf;
        out.trace_residual = std::max(out.trace_residual, std::abs(tres));
    }
    return out;
}

// --- Bochner-Weitzenbock --------------------------------------------------------

struct BochnerReport {
    double lhs = 0.0;      // Delta^{du}_m(H(du)) - d(Delta^H_m u)(grad u)
    double rhs = 0.0;      // Ric_inf(du) + |Hess^H u|_HS^2
    double defect = 0.0;
    double lap_m = 0.0;    // Delta^H_m u(x)
    double ric_inf = 0.0;
    double hess_hs2 = 0.0;
    std::vector<std::pair<double, double>> n_slack;  // (N, lhs - Ric_N - (lap)^2/N)
};

// Everything except Ric_N is evaluated with exact jets (H to order 3, u to
// order 3, varsigma to order 2); Ric_N comes from the frame route.
inline BochnerReport bochner_residual(const ChartHamiltonian& H, const WeightField& w,
                                      const ScalarField& u, const VectorXd& x,
                                      const std::vector<double>& Ns = {}, FrameOptions opts = {}) {
    const int n = H.dim();
    Jet uj = scalar_at(u, x, 3);
    VectorXd du(n);
    for (int i = 0; i < n; ++i) du[i] = uj.d(i);
    if (du.norm() == 0.0) throw Error("Bochner residual needs du != 0");
    HamJet hj = H.at(x, du, 3);
    Jet sj = w.at(x, 2);

    auto u2 = [&](int i, int j) { return uj.d2(i, j); };
    auto u3 = [&](int i, int j, int k) { return uj.d3(i, j, k); };

    // d/dx^k of Delta^H_m u, chain rule through du(x)
    VectorXd dlap = VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += hj.Hxxa(i, k, i);  // d_k H_{a_i x^i}
            for (int l = 0; l < n; ++l) acc += hj.Hxaa(i, i, l) * u2(l, k);
            double dB, dC;
            for (int j = 0; j < n; ++j) {
                dB = hj.Hxaa(k, i, j);
                for (int l = 0; l < n; ++l) dB += hj.Haaa(i, j, l) * u2(l, k);
                acc += dB * u2(i, j) + hj.Haa(i, j) * u3(i, j, k);
            }
            dC = hj.Hxa(k, i);
            for (int l = 0; l < n; ++l) dC += hj.Haa(i, l) * u2(l, k);
            acc -= dC * sj.d(i) + hj.Ha(i) * sj.d2(i, k);
        }
        dlap[k] = acc;
    }
    const VectorXd grad_u = hj.grad_a();
    const double term2 = dlap.dot(grad_u);

    // f = H(du): first and second derivatives in x
    VectorXd f1(n);
    for (int i = 0; i < n; ++i) {
        f1[i] = hj.Hx(i);
        for (int l = 0; l < n; ++l) f1[i] += hj.Ha(l) * u2(l, i);
    }
    MatrixXd f2(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = hj.Hxx(i, j);
            for (int l = 0; l < n; ++l) {
                acc += hj.Hxa(i, l) * u2(l, j) + hj.Hxa(j, l) * u2(l, i);
                acc += hj.Ha(l) * u3(l, i, j);
                for (int m = 0; m < n; ++m) acc += hj.Haa(l, m) * u2(m, j) * u2(l, i);
            }
            f2(i, j) = acc;
        }
    // Delta^{du}_m f with coefficients a_ij = H_{a_i a_j}(du)
    double lap_du_f = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double da = hj.Hxaa(i, i, j);
            for (int l = 0; l < n; ++l) da += hj.Haaa(i, j, l) * u2(l, i);
            lap_du_f += da * f1[j] + hj.Haa(i, j) * f2(i, j) - hj.Haa(i, j) * f1[j] * sj.d(i);
        }

    BochnerReport rep;
    rep.lhs = lap_du_f - term2;
    MatrixXd uxx(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) uxx(i, j) = u2(i, j);
    HessianH hh = hessian_H_data(H, x, du, uxx);
    rep.hess_hs2 = hh.matrix.squaredNorm();
    WeightedRicci ric = weighted_ricci(H, w, {x, du}, std::numeric_limits<double>::infinity(), opts);
    rep.ric_inf = ric.value;
    rep.rhs = rep.ric_inf + rep.hess_hs2;
    rep.defect = std::abs(rep.lhs - rep.rhs);
    rep.lap_m = laplacian_Hm(H, w, u, x);
    for (double N : Ns) {
        double ricN;
        if (std::isinf(N)) {
            ricN = ric.value;
        } else if (N > n) {
            ricN = ric.ric + ric.psi_d2 - ric.psi_d1 * ric.psi_d1 / (N - n);
        } else {
            ricN = std::abs(ric.psi_d1) > 1e-7 ? -std::numeric_limits<double>::infinity()
                                               : ric.ric + ric.psi_d2;
        }
        const double slack = rep.lhs - ricN - rep.lap_m * rep.lap_m / N;
        rep.n_slack.emplace_back(N, slack);
    }
    return rep;
}

// --- Laplacian comparison --------------------------------------------------------

struct ComparisonResult {
    double max_violation = -std::numeric_limits<double>::infinity();  // Delta - N s'/s on the window
    double max_equality_gap = 0.0;                                    // |Delta - N s'/s|
    bool blowup = false;
    double blowup_time = 0.0;
    std::vector<double> times, delta, bound;
};

// Integrate the trace Riccati inequality from cone (or supplied) data at t0
// and compare the weighted trace with the model bound on [t_measure, T].
// The integration runs in the linear (A, B) variables (B' = -A, A' = B R),
// which stay regular through the 1/t cone profile; Hess = -B^{-1} A.
inline ComparisonResult laplacian_comparison_check(const std::function<MatrixXd(double)>& R_of_t,
                                                   const std::function<double(double)>& psi_prime,
                                                   double K, double N, int n, double t0, double T,
                                                   double t_measure, const MatrixXd* seed = nullptr,
                                                   int steps = 4096) {
    ComparisonResult out;
    const MatrixXd H0 = seed ? *seed : MatrixXd((1.0 / t0) * MatrixXd::Identity(n, n));
    MatrixXd B = MatrixXd::Identity(n, n);
    MatrixXd A = -H0;
    const double h = (T - t0) / steps;
    double t = t0;
    double prev_det = 1.0;
    auto record = [&](double tt, const MatrixXd& Ak, const MatrixXd& Bk) {
        Eigen::FullPivLU<MatrixXd> lu(Bk);
        const double det = lu.determinant();
        // a conjugate point is a zero crossing of det B
        if (!lu.isInvertible() || lu.rcond() < 1e-10 || det * prev_det < 0.0) {
            out.blowup = true;
            out.blowup_time = tt;
            return false;
        }
        prev_det = det;
        const MatrixXd Hss = -lu.solve(Ak);
        const double delta = Hss.trace() - psi_prime(tt);
        const double bnd = s_KN_bound(K, N, tt);
        out.times.push_back(tt);
        out.delta.push_back(delta);
        out.bound.push_back(bnd);
        if (tt >= t_measure) {
            out.max_violation = std::max(out.max_violation, delta - bnd);
            out.max_equality_gap = std::max(out.max_equality_gap, std::abs(delta - bnd));
        }
        return true;
    };
    record(t, A, B);
    for (int s = 0; s < steps && !out.blowup; ++s) {
        auto f = [&](double tt, const MatrixXd& Ak, const MatrixXd& Bk) {
            return std::pair<MatrixXd, MatrixXd>(Bk * R_of_t(tt), -Ak);
        };
        auto [ka1, kb1] = f(t, A, B);
        auto [ka2, kb2] = f(t + 0.5 * h, A + 0.5 * h * ka1, B + 0.5 * h * kb1);
        auto [ka3, kb3] = f(t + 0.5 * h, A + 0.5 * h * ka2, B + 0.5 * h * kb2);
        auto [ka4, kb4] = f(t + h, A + h * ka3, B + h * kb3);
        A += (h / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
        B += (h / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
        t += h;
        if (!record(t, A, B)) break;
    }
    return out;
}

// --- measure contraction property -------------------------------------------------

struct McpResult {
    double worst_increase = 0.0;   // relative increase of the ratio (>= 0 means violation)
    bool ratio_monotone = false;
    bool equivalent = false;       // ratio verdict agrees with the trace bound interval-wise
    double worst_bound_violation = -std::numeric_limits<double>::infinity();
};

// ratio e^{varsigma(eta(t))} / s_{K,N}(t)^N non-increasing, and its
// grid-equivalence with (varsigma o eta)' <= N s'/s (the section-6.2
// convention m = e^{+varsigma} dx).
inline McpResult mcp_ratio_check(const std::vector<double>& ts, const std::vector<double>& varsigma_eta,
                                 double K, double N, double rel_tol = 1e-8) {
    if (ts.size() != varsigma_eta.size() || ts.size() < 3) throw Error("mcp grid mismatch");
    McpResult out;
    const size_t m = ts.size();
    std::vector<double> log_ratio(m);
    for (size_t k = 0; k < m; ++k) log_ratio[k] = varsigma_eta[k] - N * std::log(s_KN(K, N, ts[k]));
    double worst = -std::numeric_limits<double>::infinity();
    bool any_disagree = false;
    for (size_t k = 0; k + 1 < m; ++k) {
        const double inc = log_ratio[k + 1] - log_ratio[k];  // log r_{k+1}/r_k
        worst = std::max(worst, inc);
        // independent route: midpoint derivative against the model bound; the
        // forward difference carries an O(dt^2 |bound''|) midpoint-rule error,
        // so the verdict band scales with the bound's second difference
        const double dt = ts[k + 1] - ts[k];
        const double tmid = 0.5 * (ts[k] + ts[k + 1]);
        const double lhs = (varsigma_eta[k + 1] - varsigma_eta[k]) / dt;
        const double bnd = s_KN_bound(K, N, tmid);
        const double curv_band =
            0.5 * std::abs(s_KN_bound(K, N, ts[k]) - 2.0 * bnd + s_KN_bound(K, N, ts[k + 1]));
        out.worst_bound_violation = std::max(out.worst_bound_violation, lhs - bnd - curv_band);
        const bool ratio_down = inc <= rel_tol;
        const bool bound_holds = lhs <= bnd + curv_band + rel_tol / dt + 1e-9 * (1.0 + std::abs(bnd));
        if (ratio_down != bound_holds) any_disagree = true;
    }
    out.worst_increase = worst;
    out.ratio_monotone = worst <= rel_tol;
    out.equivalent = !any_disagree;
    return out;
}

}  // namespace hamflow
