#pragma once

// Pointwise differential operators induced by H and the reference measure:
// gradient vector, weighted divergence, weighted Laplacian, the Hessian in
// the canonical frame, and the unweighted Laplacian.

#include <vector>

#include "hamflow/hamiltonians.hpp"

namespace hamflow {

// scalar functions u on the chart are jet oracles on n variables
using ScalarField = JetField;

inline Jet scalar_at(const ScalarField& u, const VectorXd& x, int order) {
    std::vector<double> p(x.data(), x.data() + x.size());
    return jet_eval(u, p, order);
}

struct GradientResult {
    VectorXd v;
    bool degenerate = false;  // du_x = 0: the gradient may fail to be differentiable there
};

// nabla u(x) = tau*(du_x), i.e. v_i = H_{alpha_i}(x, du_x)
inline GradientResult gradient(const ChartHamiltonian& H, const ScalarField& u, const VectorXd& x) {
    const int n = H.dim();
    Jet uj = scalar_at(u, x, 1);
    VectorXd du(n);
    for (int i = 0; i < n; ++i) du[i] = uj.d(i);
    if (du.norm() == 0.0) return {VectorXd::Zero(n), true};
    return {H.at(x, du, 1).grad_a(), false};
}

// div_m V = sum_i { dV^i/dx^i - V^i dvarsigma/dx^i }
inline double divergence_m(const std::vector<JetField>& V, const WeightField& w, const VectorXd& x) {
    const int n = static_cast<int>(V.size());
    Jet sj = w.at(x, 1);
    double div = 0.0;
    for (int i = 0; i < n; ++i) {
        Jet vi = scalar_at(V[static_cast<size_t>(i)], x, 1);
        div += vi.d(i) - vi.value() * sj.d(i);
    }
    return div;
}

// weighted Laplacian on {du != 0} (or everywhere for smooth H):
//   sum_i { H_{a_i x^i}(du) + sum_j H_{a_i a_j}(du) u_{x^i x^j} - H_{a_i}(du) s_{x^i} }
inline double laplacian_Hm(const ChartHamiltonian& H, const WeightField& w, const ScalarField& u,
                           const VectorXd& x) {
    const int n = H.dim();
    Jet uj = scalar_at(u, x, 2);
    VectorXd du(n);
    for (int i = 0; i < n; ++i) du[i] = uj.d(i);
    if (du.norm() == 0.0 && !H.zero_section_smooth())
        throw Error("Laplacian undefined at critical point");
    HamJet hj = H.at(x, du, 2);
    Jet sj = w.at(x, 1);
    double lap = 0.0;
    for (int i = 0; i < n; ++i) {
        lap += hj.Hxa(i, i) - hj.Ha(i) * sj.d(i);
        for (int j = 0; j < n; ++j) lap += hj.Haa(i, j) * uj.d2(i, j);
    }
    return lap;
}

struct HessianH {
    MatrixXd matrix;  // Hess^H u in the canonical (triangular-root) gauge
    MatrixXd cholL;   // lower factor of H_{aa}(du)
    VectorXd du;
    MatrixXd uxx;
};

// Hessian matrix at a point from raw second-derivative data of u. The
// covariables are normalized so H_{aa}(du) = I by the one-shot congruence
// with C = chol(H_{aa}); in that frame
//   M = (1/2){ Hxa~ + Hxa~^T - [H_{aa} o alpha]'~ } + uxx~ .
inline HessianH hessian_H_data(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& du,
                               const MatrixXd& uxx) {
    if (du.norm() == 0.0) throw Error("Hessian requires noncritical point");
    HamJet hj = H.at(x, du, 3);
    Eigen::LLT<MatrixXd> llt(hj.haa());
    if (llt.info() != Eigen::Success) throw Error("Hessian requires positive-definite H_{aa}");
    const MatrixXd C = llt.matrixL();
    const auto lower = C.triangularView<Eigen::Lower>();
    const MatrixXd flowdet = hj.haa_flow_derivative();
    // S = C^T Hxa C^{-T}: solve C X^T = Hxa^T column-wise
    const MatrixXd S = C.transpose() * lower.solve(hj.hxa().transpose()).transpose();
    const MatrixXd D0 = lower.solve(flowdet);                       // C^{-1} flowdet
    const MatrixXd D = lower.solve(D0.transpose()).transpose();     // C^{-1} flowdet C^{-T}
    const MatrixXd U = C.transpose() * uxx * C;
    HessianH out;
    out.matrix = 0.5 * (S + S.transpose() - D) + U;
    out.cholL = C;
    out.du = du;
    out.uxx = uxx;
    return out;
}

inline HessianH hessian_H(const ChartHamiltonian& H, const ScalarField& u, const VectorXd& x) {
    const int n = H.dim();
    Jet uj = scalar_at(u, x, 2);
    VectorXd du(n);
    MatrixXd uxx(n, n);
    for (int i = 0; i < n; ++i) {
        du[i] = uj.d(i);
        for (int j = 0; j < n; ++j) uxx(i, j) = uj.d2(i, j);
    }
    return hessian_H_data(H, x, du, uxx);
}

// trace of the canonical-frame Hessian
inline double laplacian_H_unweighted(const ChartHamiltonian& H, const ScalarField& u, const VectorXd& x) {
    return hessian_H(H, u, x).matrix.trace();
}

}  // namespace hamflow
