#pragma once

// ChartHamiltonian: a nonnegative, fiberwise strongly convex scalar field
// H(x, alpha) on a single chart of T*M, exposed through a jet oracle.
// Includes the Legendre transform in both directions and the induced
// Lagrangian.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hamflow/jets.hpp"

namespace hamflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Chart {
    enum class Kind { Box, Torus };
    Kind kind = Kind::Box;
    VectorXd lo, hi;      // Box bounds
    VectorXd lengths;     // Torus side lengths

    static Chart box(VectorXd lo_, VectorXd hi_) {
        Chart c;
        c.kind = Kind::Box;
        c.lo = std::move(lo_);
        c.hi = std::move(hi_);
        return c;
    }
    static Chart torus(VectorXd lengths_) {
        Chart c;
        c.kind = Kind::Torus;
        c.lengths = std::move(lengths_);
        return c;
    }
    int dim() const { return kind == Kind::Box ? static_cast<int>(lo.size()) : static_cast<int>(lengths.size()); }
    bool contains(const VectorXd& x, double margin = 0.0) const {
        if (kind == Kind::Torus) return true;
        for (int i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
        return true;
    }
};

struct CotangentState {
    VectorXd x;
    VectorXd alpha;
};

// Derivative bundle of H at a point of T*M. Index convention in the
// underlying jet: 0..n-1 are x, n..2n-1 are alpha.
class HamJet {
public:
    HamJet(Jet j, int n) : j_(std::move(j)), n_(n) {}

    int dim() const { return n_; }
    double value() const { return j_.value(); }
    double Hx(int i) const { return j_.d(i); }
    double Ha(int i) const { return j_.d(n_ + i); }
    double Hxx(int i, int j) const { return j_.d2(i, j); }
    double Hxa(int i, int j) const { return j_.d2(i, n_ + j); }
    double Haa(int i, int j) const { return j_.d2(n_ + i, n_ + j); }
    double Hxxx(int i, int j, int k) const { return j_.d3(i, j, k); }
    double Hxxa(int i, int j, int k) const { return j_.d3(i, j, n_ + k); }
    double Hxaa(int i, int j, int k) const { return j_.d3(i, n_ + j, n_ + k); }
    double Haaa(int i, int j, int k) const { return j_.d3(n_ + i, n_ + j, n_ + k); }

    VectorXd grad_x() const {
        VectorXd v(n_);
        for (int i = 0; i < n_; ++i) v[i] = Hx(i);
        return v;
    }
    VectorXd grad_a() const {
        VectorXd v(n_);
        for (int i = 0; i < n_; ++i) v[i] = Ha(i);
        return v;
    }
    MatrixXd haa() const {
        MatrixXd m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = Haa(i, j);
        return m;
    }
    // (i, j) entry is d^2 H / dx^i dalpha_j
    MatrixXd hxa() const {
        MatrixXd m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = Hxa(i, j);
        return m;
    }
    MatrixXd hxx() const {
        MatrixXd m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = Hxx(i, j);
        return m;
    }
    // d/dt [H_{alpha_i alpha_j}(Phi_t)] at this point, expanded by the chain
    // rule along the Hamiltonian flow:
    //   sum_k { H_{a_i a_j x^k} H_{a_k} - H_{a_i a_j a_k} H_{x^k} }.
    // Requires order 3.
    MatrixXd haa_flow_derivative() const {
        MatrixXd m = MatrixXd::Zero(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k)
                    m(i, j) += Hxaa(k, i, j) * Ha(k) - Haaa(i, j, k) * Hx(k);
        return m;
    }
    const Jet& jet() const { return j_; }

private:
    Jet j_;
    int n_;
};

class ChartHamiltonian {
public:
    ChartHamiltonian() = default;
    ChartHamiltonian(std::string name, int n, Chart chart, bool zero_section_smooth, JetField eval,
                     bool fiberwise_nonneg = true)
        : name_(std::move(name)),
          n_(n),
          chart_(std::move(chart)),
          zero_section_smooth_(zero_section_smooth),
          fiberwise_nonneg_(fiberwise_nonneg),
          eval_(std::move(eval)) {}

    const std::string& name() const { return name_; }
    int dim() const { return n_; }
    const Chart& chart() const { return chart_; }
    bool zero_section_smooth() const { return zero_section_smooth_; }
    // false for natural mechanical Hamiltonians H^g + Z, which are smooth on
    // the whole of T*M and may be negative (so H(x,0) = 0 is waived)
    bool fiberwise_nonneg() const { return fiberwise_nonneg_; }

    Jet eval_jets(std::span<const Jet> xalpha) const { return eval_(xalpha); }

    HamJet at(const VectorXd& x, const VectorXd& alpha, int order) const {
        std::vector<double> p(static_cast<size_t>(2 * n_));
        for (int i = 0; i < n_; ++i) {
            p[static_cast<size_t>(i)] = x[i];
            p[static_cast<size_t>(n_ + i)] = alpha[i];
        }
        return HamJet(jet_eval(eval_, p, order), n_);
    }
    HamJet at(const CotangentState& s, int order) const { return at(s.x, s.alpha, order); }

    double value(const VectorXd& x, const VectorXd& alpha) const { return at(x, alpha, 0).value(); }

private:
    std::string name_;
    int n_ = 0;
    Chart chart_;
    bool zero_section_smooth_ = true;
    bool fiberwise_nonneg_ = true;
    JetField eval_;
};

// A smooth weight varsigma with reference measure m = e^{-varsigma} dx.
struct WeightField {
    JetField varsigma;  // oracle on n variables
    std::string name = "lebesgue";

    static WeightField lebesgue(int /*n*/) {
        WeightField w;
        w.varsigma = [](std::span<const Jet> v) {
            return Jet::constant(v[0].nvars(), v[0].order(), 0.0);
        };
        return w;
    }
    Jet at(const VectorXd& x, int order) const {
        std::vector<double> p(x.data(), x.data() + x.size());
        return jet_eval(varsigma, p, order);
    }
};

// --- Legendre transform -----------------------------------------------------

// v_i = H_{alpha_i}(x, alpha). For alpha = 0 across a non-smooth zero section
// the dual is the zero vector by the L|_0 = 0 duality convention.
inline VectorXd legendre_dual(const ChartHamiltonian& H, const CotangentState& s) {
    if (s.alpha.norm() == 0.0 && !H.zero_section_smooth()) return VectorXd::Zero(H.dim());
    return H.at(s, 1).grad_a();
}

struct LegendreInverse {
    VectorXd alpha;
    bool degenerate = false;  // set when v = 0 across a non-smooth zero section
};

// Solve H_alpha(x, alpha) = v by damped Newton on the strictly convex
// problem phi(alpha) = H(x, alpha) - v.alpha.
inline LegendreInverse legendre_inverse(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& v,
                                        double tol = 1e-10, int max_iter = 100) {
    const int n = H.dim();
    if (v.norm() == 0.0) {
        if (H.zero_section_smooth()) return {VectorXd::Zero(n), false};
        return {VectorXd::Zero(n), true};
    }
    VectorXd alpha = v;  // near-quadratic initial guess
    auto phi = [&](const VectorXd& a) { return H.value(x, a) - v.dot(a); };
    double phi_cur = phi(alpha);
    for (int it = 0; it < max_iter; ++it) {
        HamJet hj = H.at(x, alpha, 2);
        VectorXd grad = hj.grad_a() - v;
        if (grad.norm() <= tol * (1.0 + v.norm())) return {alpha, false};
        MatrixXd haa = hj.haa();
        VectorXd step;
        Eigen::LLT<MatrixXd> llt(haa);
        if (llt.info() == Eigen::Success)
            step = -llt.solve(grad);
        else
            step = -grad;  // fall back to steepest descent when curvature degenerates
        double t = 1.0;
        const double slope = grad.dot(step);
        while (t > 1e-12) {
            const double phi_new = phi(alpha + t * step);
            if (phi_new <= phi_cur + 1e-4 * t * slope) {
                alpha += t * step;
                phi_cur = phi_new;
                break;
            }
            t *= 0.5;
        }
        if (t <= 1e-12) break;
    }
    {
        HamJet hj = H.at(x, alpha, 1);
        if ((hj.grad_a() - v).norm() <= tol * (1.0 + v.norm())) return {alpha, false};
    }
    throw Error("non-coercive or ill-conditioned Hamiltonian");
}

// L(x, v) = alpha(v) - H(x, alpha) at alpha = tau(v).
inline double lagrangian(const ChartHamiltonian& H, const VectorXd& x, const VectorXd& v) {
    LegendreInverse li = legendre_inverse(H, x, v);
    if (li.degenerate || v.norm() == 0.0) return 0.0;
    return li.alpha.dot(v) - H.value(x, li.alpha);
}

// --- invariant sampler -------------------------------------------------------

// H(x,0) = 0, H > 0 off the zero section, and H_{alpha alpha} > 0 at sampled
// alpha != 0. Used as a post-condition by the builtin factory.
inline void sample_invariants(const ChartHamiltonian& H, int samples = 24, unsigned seed = 12345) {
    const int n = H.dim();
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int s = 0; s < samples; ++s) {
        VectorXd x(n), a(n);
        for (int i = 0; i < n; ++i) {
            if (H.chart().kind == Chart::Kind::Box) {
                const double mid = 0.5 * (H.chart().lo[i] + H.chart().hi[i]);
                const double half = 0.5 * (H.chart().hi[i] - H.chart().lo[i]);
                x[i] = mid + 0.5 * half * u(rng);
            } else {
                x[i] = 0.5 * H.chart().lengths[i] * (u(rng) + 1.0);
            }
            a[i] = u(rng);
        }
        if (a.norm() < 1e-3) a[0] += 1.0;
        if (H.fiberwise_nonneg()) {
            if (std::abs(H.value(x, VectorXd::Zero(n))) > 1e-12)
                throw Error("Hamiltonian invariant violated: H(x,0) != 0");
            const double hv = H.value(x, a);
            if (!(hv > 0.0)) throw Error("Hamiltonian invariant violated: H not positive off zero section");
        }
        Eigen::LLT<MatrixXd> llt(H.at(x, a, 2).haa());
        if (llt.info() != Eigen::Success)
            throw Error("Hamiltonian invariant violated: H_{aa} not positive-definite");
    }
}

}  // namespace hamflow
