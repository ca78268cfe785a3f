#pragma once

// Desk-scale 1D optimal transport for translation-invariant Lagrangian
// costs: monotone rearrangement (provably optimal for convex costs),
// displacement interpolation with the weighted change-of-variables formula,
// entropy / Fisher functionals, K-convexity, the entropy-derivative bound,
// and the Talagrand / HWI inequalities.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "hamflow/common.hpp"

namespace hamflow {

// dual pair H = |a|^p / p <-> L = |v|^q / q on the line (q = p/(p-1));
// p = 2 is the self-dual quadratic
struct DualPair1D {
    double p = 2.0;
    bool translation_invariant = true;

    static DualPair1D quadratic() { return {2.0, true}; }
    static DualPair1D power(double p_) {
        if (p_ <= 1.0) throw Error("dual pair needs p > 1");
        return {p_, true};
    }
    double q() const { return p / (p - 1.0); }
    double H(double a) const { return std::pow(std::abs(a), p) / p; }
    double Hp(double a) const { return std::pow(std::abs(a), p - 1.0) * (a < 0 ? -1.0 : 1.0); }
    double L(double v) const { return std::pow(std::abs(v), q()) / q(); }
    double Lp(double v) const { return std::pow(std::abs(v), q() - 1.0) * (v < 0 ? -1.0 : 1.0); }
};

// c^L_T(x, y) = T L((y - x)/T): the straight constant-speed line is optimal
// for convex translation-invariant L
inline double cost_cT(const DualPair1D& d, double x, double y, double T) {
    if (!d.translation_invariant) throw Error("1D closed form requires translation invariance");
    return T * d.L((y - x) / T);
}

struct Grid1D {
    double a = 0.0, b = 1.0;
    int n = 0;
    double h() const { return (b - a) / n; }
    double center(int i) const { return a + (i + 0.5) * h(); }
    double edge(int i) const { return a + i * h(); }
};

struct DensityProfile {
    Grid1D grid;
    std::vector<double> rho;  // density against m = e^{-psi} dx, cell centers
    std::vector<double> psi;
    std::vector<double> cdf;  // edges, size n+1, cdf[0] = 0, cdf[n] = 1
    std::function<double(double)> psi_fn;

    double cell_mass(int i) const {
        return rho[static_cast<size_t>(i)] * std::exp(-psi[static_cast<size_t>(i)]) * grid.h();
    }
    double cdf_at_center(int i) const {
        return 0.5 * (cdf[static_cast<size_t>(i)] + cdf[static_cast<size_t>(i + 1)]);
    }
};

inline DensityProfile make_profile(Grid1D g, const std::function<double(double)>& rho_fn,
                                   const std::function<double(double)>& psi_fn) {
    DensityProfile p;
    p.grid = g;
    p.psi_fn = psi_fn;
    p.rho.resize(static_cast<size_t>(g.n));
    p.psi.resize(static_cast<size_t>(g.n));
    double total = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const double x = g.center(i);
        const double r = rho_fn(x);
        if (r < 0.0) throw Error("density must be nonnegative");
        p.rho[static_cast<size_t>(i)] = r;
        p.psi[static_cast<size_t>(i)] = psi_fn(x);
        total += r * std::exp(-p.psi[static_cast<size_t>(i)]) * g.h();
    }
    if (!(total > 0.0)) throw Error("profile has zero mass");
    for (double& r : p.rho) r /= total;  // normalize to a probability density
    p.cdf.assign(static_cast<size_t>(g.n + 1), 0.0);
    for (int i = 0; i < g.n; ++i) p.cdf[static_cast<size_t>(i + 1)] = p.cdf[static_cast<size_t>(i)] + p.cell_mass(i);
    p.cdf[static_cast<size_t>(g.n)] = 1.0;  // pin the endpoint exactly
    return p;
}

// inverse of a piecewise-linear CDF given at edges; leftmost preimage on flats
inline double cdf_inverse(const DensityProfile& p, double q) {
    const auto& c = p.cdf;
    const int n = p.grid.n;
    if (q <= 0.0) {
        for (int i = 0; i < n; ++i)
            if (c[static_cast<size_t>(i + 1)] > 0.0) return p.grid.edge(i);
        return p.grid.edge(0);
    }
    if (q >= 1.0) {
        for (int i = n; i > 0; --i)
            if (c[static_cast<size_t>(i - 1)] < 1.0) return p.grid.edge(i);
        return p.grid.edge(n);
    }
    const auto it = std::upper_bound(c.begin(), c.end(), q);
    int i = static_cast<int>(it - c.begin()) - 1;
    i = std::clamp(i, 0, n - 1);
    const double c0 = c[static_cast<size_t>(i)], c1 = c[static_cast<size_t>(i + 1)];
    if (c1 <= c0) return p.grid.edge(i);
    return p.grid.edge(i) + (q - c0) / (c1 - c0) * p.grid.h();
}

struct TransportPlan1D {
    std::vector<double> map;       // T(x_i) at mu cell centers
    std::vector<double> map_edge;  // T at mu cell edges (size n+1)
    std::vector<double> dphi;      // tau(eta'(0)) = L'((T(x)-x)/T)
    double horizon = 1.0;
    double cost = 0.0;  // int c^L_T(x, T(x)) dmu
};

// CDF inversion: T = G^{-1} o F, the optimal map for convex
// translation-invariant costs on the line
inline TransportPlan1D monotone_transport(const DensityProfile& mu, const DensityProfile& nu,
                                          const DualPair1D& d, double T) {
    for (int i = 0; i < nu.grid.n; ++i)
        if (nu.cell_mass(i) > 0.5) throw Error("CDF inversion ill-posed at resolution");
    TransportPlan1D plan;
    plan.horizon = T;
    const int n = mu.grid.n;
    plan.map.resize(static_cast<size_t>(n));
    plan.dphi.resize(static_cast<size_t>(n));
    plan.map_edge.resize(static_cast<size_t>(n + 1));
    for (int i = 0; i <= n; ++i) {
        plan.map_edge[static_cast<size_t>(i)] = cdf_inverse(nu, mu.cdf[static_cast<size_t>(i)]);
        if (i > 0 && plan.map_edge[static_cast<size_t>(i)] < plan.map_edge[static_cast<size_t>(i - 1)])
            throw Error("monotone rearrangement produced a decreasing map");
    }
    for (int i = 0; i < n; ++i) {
        const double x = mu.grid.center(i);
        const double y = cdf_inverse(nu, mu.cdf_at_center(i));
        plan.map[static_cast<size_t>(i)] = y;
        plan.dphi[static_cast<size_t>(i)] = d.Lp((y - x) / T);
        plan.cost += cost_cT(d, x, y, T) * mu.cell_mass(i);
    }
    return plan;
}

// displacement interpolation T_t(x) = x + (t/T)(T(x) - x); the density is
// rebinned conservatively from the pushed-forward edge masses
inline DensityProfile displacement_interpolation(const TransportPlan1D& plan, const DensityProfile& mu0,
                                                 double t) {
    if (t < 0.0 || t > plan.horizon) throw Error("interpolation time outside [0, T]");
    const int n = mu0.grid.n;
    const double w = t / plan.horizon;
    std::vector<double> y(static_cast<size_t>(n + 1));
    for (int i = 0; i <= n; ++i) {
        const double e = mu0.grid.edge(i);
        y[static_cast<size_t>(i)] = e + w * (plan.map_edge[static_cast<size_t>(i)] - e);
        if (i > 0 && y[static_cast<size_t>(i)] < y[static_cast<size_t>(i - 1)] - 1e-14)
            throw Error("interpolation loses injectivity");
    }
    if (y.front() < mu0.grid.a - 1e-12 || y.back() > mu0.grid.b + 1e-12)
        throw Error("interpolation exits the grid");
    DensityProfile out = mu0;
    std::fill(out.rho.begin(), out.rho.end(), 0.0);
    // conservative rebinning of interval masses onto the original edges
    for (int i = 0; i < n; ++i) {
        const double mass = mu0.cdf[static_cast<size_t>(i + 1)] - mu0.cdf[static_cast<size_t>(i)];
        if (mass <= 0.0) continue;
        double lo = y[static_cast<size_t>(i)], hi = y[static_cast<size_t>(i + 1)];
        if (hi - lo < 1e-300) {  // collapses to a point: assign to its cell
            const int j = std::clamp(static_cast<int>((lo - mu0.grid.a) / mu0.grid.h()), 0, n - 1);
            out.rho[static_cast<size_t>(j)] += mass;
            continue;
        }
        int j0 = std::clamp(static_cast<int>((lo - mu0.grid.a) / mu0.grid.h()), 0, n - 1);
        int j1 = std::clamp(static_cast<int>((hi - mu0.grid.a) / mu0.grid.h()), 0, n - 1);
        for (int j = j0; j <= j1; ++j) {
            const double cl = std::max(lo, mu0.grid.edge(j));
            const double ch = std::min(hi, mu0.grid.edge(j + 1));
            if (ch > cl) out.rho[static_cast<size_t>(j)] += mass * (ch - cl) / (hi - lo);
        }
    }
    // out.rho currently holds masses; convert to densities and rebuild the cdf
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        total += out.rho[static_cast<size_t>(j)];
    }
    if (std::abs(total - 1.0) > 1e-10) throw Error("interpolation lost mass");
    for (int j = 0; j < n; ++j) {
        out.cdf[static_cast<size_t>(j + 1)] = out.cdf[static_cast<size_t>(j)] + out.rho[static_cast<size_t>(j)];
        out.rho[static_cast<size_t>(j)] /= std::exp(-out.psi[static_cast<size_t>(j)]) * out.grid.h();
    }
    out.cdf[static_cast<size_t>(n)] = 1.0;
    return out;
}

// --- functionals -----------------------------------------------------------------

inline double entropy(const DensityProfile& mu) {
    double e = 0.0;
    for (int i = 0; i < mu.grid.n; ++i) {
        const double r = mu.rho[static_cast<size_t>(i)];
        if (r > 0.0) e += r * std::log(r) * std::exp(-mu.psi[static_cast<size_t>(i)]) * mu.grid.h();
    }
    return e;
}

struct FisherResult {
    double value = 0.0;
    bool reliable = true;
};

// I_m(mu) = int H(-d log rho) dmu with centered differences of log rho
inline FisherResult fisher_information(const DualPair1D& d, const DensityProfile& mu) {
    FisherResult out;
    const int n = mu.grid.n;
    int lo = 0, hi = n - 1;
    while (lo < n && mu.rho[static_cast<size_t>(lo)] <= 0.0) ++lo;
    while (hi >= 0 && mu.rho[static_cast<size_t>(hi)] <= 0.0) --hi;
    for (int i = lo + 1; i < hi; ++i) {
        const double rm = mu.rho[static_cast<size_t>(i - 1)], r0 = mu.rho[static_cast<size_t>(i)],
                     rp = mu.rho[static_cast<size_t>(i + 1)];
        if (r0 <= 1e-300 || rm <= 0.0 || rp <= 0.0) {
            out.reliable = false;
            continue;
        }
        const double dlog = (std::log(rp) - std::log(rm)) / (2.0 * mu.grid.h());
        out.value += d.H(-dlog) * mu.cell_mass(i);
    }
    return out;
}

struct TransportCosts {
    double CL = 0.0;  // int c^L_T(x, T(x)) dmu
    double CH = 0.0;  // T int H(dphi) dmu
};

inline TransportCosts transport_costs(const DualPair1D& d, const TransportPlan1D& plan,
                                      const DensityProfile& mu0) {
    TransportCosts out;
    out.CL = plan.cost;
    for (int i = 0; i < mu0.grid.n; ++i)
        out.CH += plan.horizon * d.H(plan.dphi[static_cast<size_t>(i)]) * mu0.cell_mass(i);
    return out;
}

// Ent(mu_t) by the change-of-variables route:
//   Ent(mu_t) = Ent(mu_0) - int log D_m[T_t] dmu,
//   D_m[T_t](x) = e^{psi(x) - psi(T_t(x))} T_t'(x).
inline double entropy_along(const TransportPlan1D& plan, const DensityProfile& mu0, double t) {
    const int n = mu0.grid.n;
    const double w = t / plan.horizon;
    double corr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mass = mu0.cell_mass(i);
        if (mass <= 1e-14) continue;  // flat CDF stretches carry no information
        const double x = mu0.grid.center(i);
        const double tx = x + w * (plan.map[static_cast<size_t>(i)] - x);
        const double e0 = mu0.grid.edge(i), e1 = mu0.grid.edge(i + 1);
        const double y0 = e0 + w * (plan.map_edge[static_cast<size_t>(i)] - e0);
        const double y1 = e1 + w * (plan.map_edge[static_cast<size_t>(i + 1)] - e1);
        const double tprime = (y1 - y0) / mu0.grid.h();
        if (tprime <= 0.0) throw Error("interpolation loses injectivity");
        const double D = std::exp(mu0.psi_fn(x) - mu0.psi_fn(tx)) * tprime;
        corr += std::log(D) * mass;
    }
    return entropy(mu0) - corr;
}

// pointwise (D_m[T_t] - 1)/t, used to verify the Jacobian expansion against
// the weighted Laplacian of the potential
inline std::vector<double> jacobian_rate(const TransportPlan1D& plan, const DensityProfile& mu0, double t) {
    const int n = mu0.grid.n;
    const double w = t / plan.horizon;
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (mu0.cell_mass(i) <= 1e-14) continue;
        const double x = mu0.grid.center(i);
        const double tx = x + w * (plan.map[static_cast<size_t>(i)] - x);
        const double e0 = mu0.grid.edge(i), e1 = mu0.grid.edge(i + 1);
        const double y0 = e0 + w * (plan.map_edge[static_cast<size_t>(i)] - e0);
        const double y1 = e1 + w * (plan.map_edge[static_cast<size_t>(i + 1)] - e1);
        const double D = std::exp(mu0.psi_fn(x) - mu0.psi_fn(tx)) * (y1 - y0) / mu0.grid.h();
        out[static_cast<size_t>(i)] = (D - 1.0) / t;
    }
    return out;
}

struct KConvexityResult {
    double worst_defect = -std::numeric_limits<double>::infinity();
    double modulus_integral = 0.0;  // int H(dphi) dmu0
};

// Ent(mu_{(1-t)a+tb}) <= (1-t) Ent(mu_a) + t Ent(mu_b)
//                        - (K/2)(1-t) t (b-a)^2 int H(dphi) dmu0
inline KConvexityResult k_convexity_check(const DualPair1D& d, const TransportPlan1D& plan,
                                          const DensityProfile& mu0, double K, int grid_steps = 8) {
    KConvexityResult out;
    for (int i = 0; i < mu0.grid.n; ++i)
        out.modulus_integral += d.H(plan.dphi[static_cast<size_t>(i)]) * mu0.cell_mass(i);
    const double T = plan.horizon;
    for (int ia = 0; ia <= grid_steps; ++ia)
        for (int ib = ia + 1; ib <= grid_steps; ++ib)
            for (int it = 1; it < 4; ++it) {
                const double a = T * ia / grid_steps, b = T * ib / grid_steps;
                const double t = it / 4.0;
                const double mid = entropy_along(plan, mu0, (1.0 - t) * a + t * b);
                const double bound = (1.0 - t) * entropy_along(plan, mu0, a) +
                                     t * entropy_along(plan, mu0, b) -
                                     0.5 * K * (1.0 - t) * t * sqr(b - a) * out.modulus_integral;
                out.worst_defect = std::max(out.worst_defect, mid - bound);
            }
    return out;
}

struct EntropyDerivative {
    double lhs = 0.0;  // one-sided slope of Ent(mu_t) at t = 0+
    double rhs = 0.0;  // int (d rho / rho)(grad phi) dmu
    double slack() const { return lhs - rhs; }
};

inline EntropyDerivative entropy_derivative_check(const DualPair1D& d, const TransportPlan1D& plan,
                                                  const DensityProfile& mu0, double t1 = 1e-3) {
    EntropyDerivative out;
    const double e0 = entropy(mu0);
    // three-point one-sided extrapolation of the forward slope
    auto slope = [&](double t) { return (entropy_along(plan, mu0, t) - e0) / t; };
    const double s1 = slope(t1), s2 = slope(0.5 * t1), s3 = slope(0.25 * t1);
    const double r1 = 2.0 * s2 - s1, r2 = 2.0 * s3 - s2;
    out.lhs = 2.0 * r2 - r1;
    const int n = mu0.grid.n;
    for (int i = 1; i + 1 < n; ++i) {
        const double rm = mu0.rho[static_cast<size_t>(i - 1)], r0 = mu0.rho[static_cast<size_t>(i)],
                     rp = mu0.rho[static_cast<size_t>(i + 1)];
        if (r0 <= 0.0 || rm <= 0.0 || rp <= 0.0) continue;
        const double dlog = (std::log(rp) - std::log(rm)) / (2.0 * mu0.grid.h());
        const double gradphi = d.Hp(plan.dphi[static_cast<size_t>(i)]);  // tau*(dphi)
        out.rhs += dlog * gradphi * mu0.cell_mass(i);
    }
    return out;
}

struct TalagrandHwi {
    double ent = 0.0, fisher = 0.0, CH = 0.0, CL = 0.0, intL = 0.0;
    double talagrand_slack = 0.0;  // (2/KT) Ent - C^H_T
    double hwi_slack = 0.0;        // T I + T int L(grad phi) - (KT/2) C^H - Ent
};

inline TalagrandHwi talagrand_hwi_check(const DualPair1D& d, const DensityProfile& mu,
                                        const DensityProfile& m, double T, double K) {
    TalagrandHwi out;
    TransportPlan1D plan = monotone_transport(mu, m, d, T);
    out.ent = entropy(mu);
    out.fisher = fisher_information(d, mu).value;
    TransportCosts costs = transport_costs(d, plan, mu);
    out.CH = costs.CH;
    out.CL = costs.CL;
    for (int i = 0; i < mu.grid.n; ++i)
        out.intL += d.L(d.Hp(plan.dphi[static_cast<size_t>(i)])) * mu.cell_mass(i);
    out.talagrand_slack = (2.0 / (K * T)) * out.ent - out.CH;
    out.hwi_slack = T * out.fisher + T * out.intL - 0.5 * K * T * out.CH - out.ent;
    return out;
}

// --- brute-force assignment oracle -----------------------------------------------

// minimum transport cost between equal-mass atom sets by exhaustive search
// over permutations (k <= 9); the independent oracle for the Monge step
inline double assignment_min_cost(std::vector<double> xs, std::vector<double> ys, const DualPair1D& d,
                                  double T) {
    if (xs.size() != ys.size() || xs.size() > 9) throw Error("oracle needs equal sizes <= 9");
    std::vector<int> perm(ys.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (size_t i = 0; i < xs.size(); ++i)
            c += cost_cT(d, xs[i], ys[static_cast<size_t>(perm[i])], T);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(xs.size());
}

inline double monotone_atom_cost(std::vector<double> xs, std::vector<double> ys, const DualPair1D& d,
                                 double T) {
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double c = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) c += cost_cT(d, xs[i], ys[i], T);
    return c / static_cast<double>(xs.size());
}

}  // namespace hamflow
