#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hamflow/transport1d.hpp"

using namespace hamflow;
using Catch::Approx;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log sqrt(2 pi)

// standard Gaussian reference measure m = e^{-psi} dx
double gauss_psi(double x) { return 0.5 * x * x + kLogSqrt2Pi; }

// profile of N(shift, 1) against the standard Gaussian m
DensityProfile gaussian_vs_gauss(double shift, int n = 2048, double pad = 9.0) {
    Grid1D g{-pad, pad + shift, n};
    return make_profile(
        g, [shift](double x) { return std::exp(shift * x - 0.5 * shift * shift); }, gauss_psi);
}

DensityProfile gaussian_vs_lebesgue(double mean, double sd, Grid1D g) {
    return make_profile(
        g, [=](double x) { return std::exp(-0.5 * sqr((x - mean) / sd)); },
        [](double) { return 0.0; });
}

}  // namespace

TEST_CASE("Lagrangian cost on the line") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("quadratic: c = (y-x)^2 / (2T)") {
        CHECK(cost_cT(q, 0.3, 1.1, 2.0) == Approx(sqr(0.8) / 4.0));
    }
    SECTION("y = x costs nothing") { CHECK(cost_cT(q, 0.7, 0.7, 1.0) == 0.0); }
    SECTION("L = |v|^3/3 from 0 to 1 in unit time costs 1/3") {
        DualPair1D c = DualPair1D::power(1.5);  // H exponent p = 1.5 gives q = 3
        CHECK(c.q() == Approx(3.0));
        CHECK(cost_cT(c, 0.0, 1.0, 1.0) == Approx(1.0 / 3.0));
    }
    SECTION("x-dependent Lagrangians are rejected") {
        DualPair1D bad = DualPair1D::quadratic();
        bad.translation_invariant = false;
        CHECK_THROWS_AS(cost_cT(bad, 0.0, 1.0, 1.0), Error);
    }
}

TEST_CASE("monotone transport") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("identity: mu = nu") {
        DensityProfile mu = gaussian_vs_gauss(0.0, 512);
        TransportPlan1D plan = monotone_transport(mu, mu, q, 1.0);
        CHECK(plan.cost <= 1e-12);
        for (int i = 256 - 64; i < 256 + 64; ++i)
            CHECK(plan.map[static_cast<size_t>(i)] == Approx(mu.grid.center(i)).margin(1e-9));
    }
    SECTION("Gaussians N(0,1) -> N(a,1): translation by a, cost a^2/2") {
        const double a = 0.8;
        Grid1D g{-9.0, 9.0 + a, 2048};
        DensityProfile mu = gaussian_vs_lebesgue(0.0, 1.0, g);
        DensityProfile nu = gaussian_vs_lebesgue(a, 1.0, g);
        TransportPlan1D plan = monotone_transport(mu, nu, q, 1.0);
        CHECK(plan.cost == Approx(0.5 * a * a).epsilon(1e-6));
        for (int i = 0; i < g.n; ++i) {
            const double x = g.center(i);
            if (std::abs(x) > 4.0) continue;
            CHECK(plan.map[static_cast<size_t>(i)] == Approx(x + a).margin(1e-4));
        }
    }
    SECTION("uniform[0, 1/2] -> uniform[1/2, 1]: translation by 1/2") {
        Grid1D g{-0.1, 1.1, 1200};
        auto uniform = [](double lo, double hi) {
            return [lo, hi](double x) { return (x >= lo && x < hi) ? 1.0 : 0.0; };
        };
        DensityProfile mu = make_profile(g, uniform(0.0, 0.5), [](double) { return 0.0; });
        DensityProfile nu = make_profile(g, uniform(0.5, 1.0), [](double) { return 0.0; });
        TransportPlan1D plan = monotone_transport(mu, nu, q, 1.0);
        for (int i = 0; i < g.n; ++i) {
            const double x = g.center(i);
            if (x < 0.05 || x > 0.45) continue;
            CHECK(plan.map[static_cast<size_t>(i)] == Approx(x + 0.5).margin(1e-9));
        }
        CHECK(plan.cost == Approx(0.125).epsilon(1e-9));
    }
    SECTION("monotone plan beats the independent coupling") {
        const double a = 0.8;
        Grid1D g{-9.0, 9.0 + a, 512};
        DensityProfile mu = gaussian_vs_lebesgue(0.0, 1.0, g);
        DensityProfile nu = gaussian_vs_lebesgue(a, 0.7, g);
        TransportPlan1D plan = monotone_transport(mu, nu, q, 1.0);
        double indep = 0.0;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                indep += cost_cT(q, g.center(i), g.center(j), 1.0) * mu.cell_mass(i) * nu.cell_mass(j);
        CHECK(plan.cost <= indep + 1e-12);
    }
    SECTION("dominant atoms in nu are rejected") {
        Grid1D g{0.0, 1.0, 16};
        DensityProfile nu = make_profile(
            g, [](double x) { return x < 0.0625 ? 1.0 : 0.01; }, [](double) { return 0.0; });
        DensityProfile mu = make_profile(g, [](double) { return 1.0; }, [](double) { return 0.0; });
        CHECK_THROWS_WITH(monotone_transport(mu, nu, DualPair1D::quadratic(), 1.0),
                          Catch::Matchers::ContainsSubstring("ill-posed"));
    }
}

TEST_CASE("monotone optimality against the brute-force assignment oracle") {
    std::mt19937 rng(71);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (DualPair1D d : {DualPair1D::quadratic(), DualPair1D::power(3.0), DualPair1D::power(1.5)}) {
        for (int k : {6, 8}) {
            std::vector<double> xs, ys;
            for (int i = 0; i < k; ++i) {
                xs.push_back(u(rng));
                ys.push_back(u(rng) + 0.4);
            }
            const double mono = monotone_atom_cost(xs, ys, d, 1.0);
            const double best = assignment_min_cost(xs, ys, d, 1.0);
            CHECK(std::abs(mono - best) <= 1e-8);
        }
    }
}

TEST_CASE("displacement interpolation") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("t = 0 reproduces mu0 (cell masses)") {
        DensityProfile mu = gaussian_vs_gauss(0.6, 1024);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, q, 1.0);
        DensityProfile r = displacement_interpolation(plan, mu, 0.0);
        double err = 0.0;
        for (int i = 0; i < mu.grid.n; ++i) err = std::max(err, std::abs(r.cell_mass(i) - mu.cell_mass(i)));
        CHECK(err <= 1e-12);
    }
    SECTION("Gaussian pair: mu_t is the translated family, mass exactly one") {
        const double a = 0.8;
        Grid1D g{-9.0, 9.0 + a, 2048};
        DensityProfile mu = gaussian_vs_lebesgue(0.0, 1.0, g);
        DensityProfile nu = gaussian_vs_lebesgue(a, 1.0, g);
        TransportPlan1D plan = monotone_transport(mu, nu, q, 1.0);
        for (double t : {0.25, 0.5, 0.9}) {
            DensityProfile r = displacement_interpolation(plan, mu, t);
            CHECK(std::abs(r.cdf.back() - 1.0) <= 1e-10);
            double err = 0.0;
            for (int i = 0; i < g.n; ++i) {
                const double x = g.center(i);
                if (std::abs(x - t * a) > 4.0) continue;
                const double expect = std::exp(-0.5 * sqr(x - t * a)) / std::sqrt(2.0 * M_PI);
                err = std::max(err, std::abs(r.rho[static_cast<size_t>(i)] - expect));
            }
            CHECK(err <= 2e-4);
        }
    }
    SECTION("change of variables: analytic Gaussian family to 1e-8") {
        // both sides of int f(rho_t) dm = int f(rho_0/D) D dm by quadrature
        // with the exact translation map T_t(x) = x - t a; f in {s log s, s^2}
        const double a = 0.8, t = 0.6;
        Grid1D g{-9.0, 9.0 + a, 2048};
        auto rho0 = [a](double x) { return std::exp(a * x - 0.5 * a * a); };
        auto D = [&](double x) { return std::exp(t * a * x - 0.5 * sqr(t * a)); };  // psi(x)-psi(x-ta)
        auto rhot = [&](double x) { return std::exp((1 - t) * a * x - 0.5 * sqr((1 - t) * a)); };
        for (int which : {0, 1}) {
            auto f = [&](double s) { return which == 0 ? (s > 0 ? s * std::log(s) : 0.0) : s * s; };
            double lhs = 0.0, rhs = 0.0;
            for (int i = 0; i < g.n; ++i) {
                const double x = g.center(i);
                const double dm = std::exp(-gauss_psi(x)) * g.h();
                lhs += f(rhot(x)) * dm;
                rhs += f(rho0(x) / D(x)) * D(x) * dm;
            }
            CHECK(std::abs(lhs - rhs) <= 1e-8);
        }
    }
    SECTION("change of variables through the numerical plan") {
        const double a = 0.8, t = 0.6;
        DensityProfile mu = gaussian_vs_gauss(a, 2048);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, DualPair1D::quadratic(), 1.0);
        DensityProfile rt = displacement_interpolation(plan, mu, t);
        // lhs from the rebinned density, rhs from the change-of-variables sum
        double lhs = 0.0;
        for (int i = 0; i < mu.grid.n; ++i) {
            const double r = rt.rho[static_cast<size_t>(i)];
            if (r > 0.0) lhs += r * std::log(r) * std::exp(-rt.psi[static_cast<size_t>(i)]) * rt.grid.h();
        }
        const double rhs = entropy_along(plan, mu, t);
        CHECK(std::abs(lhs - rhs) <= 2e-5);
    }
}

TEST_CASE("entropy, Fisher information and transport costs") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("mu = m: all zero") {
        DensityProfile m0 = gaussian_vs_gauss(0.0, 1024);
        CHECK(std::abs(entropy(m0)) <= 1e-10);
        CHECK(std::abs(fisher_information(q, m0).value) <= 1e-10);
    }
    SECTION("Ent >= 0 against probability reference measures (Jensen)") {
        // randomized positive densities against the Gaussian reference
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> u(0.2, 1.5);
        for (int trial = 0; trial < 6; ++trial) {
            const double c1 = u(rng), c2 = u(rng), k = u(rng);
            Grid1D g{-9.0, 9.0, 1024};
            DensityProfile mu = make_profile(
                g, [=](double x) { return c1 + c2 * sqr(std::sin(k * x)); }, gauss_psi);
            CHECK(entropy(mu) >= -1e-12);
        }
    }
    SECTION("Gaussian closed forms: Ent = a^2/2 and I = a^2/2") {
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a);
        CHECK(entropy(mu) == Approx(0.5 * a * a).margin(1e-6));
        FisherResult fi = fisher_information(q, mu);
        CHECK(fi.reliable);
        CHECK(fi.value == Approx(0.5 * a * a).margin(1e-6));
    }
    SECTION("C^H = C^L for the quadratic Hamiltonian") {
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, q, 1.0);
        TransportCosts c = transport_costs(q, plan, mu);
        CHECK(std::abs(c.CH - c.CL) <= 1e-8);
        CHECK(c.CH == Approx(0.5 * a * a).margin(1e-5));
    }
    SECTION("p = 3 translated pair: C^H from the plan matches the closed form") {
        DualPair1D d = DualPair1D::power(3.0);
        const double shift = 0.5, T = 1.0;
        Grid1D g{-0.2, 1.7, 1500};
        DensityProfile mu = gaussian_vs_lebesgue(0.4, 0.08, g);
        DensityProfile nu = gaussian_vs_lebesgue(0.4 + shift, 0.08, g);
        TransportPlan1D plan = monotone_transport(mu, nu, d, T);
        TransportCosts c = transport_costs(d, plan, mu);
        // translation: dphi = L'(shift/T) everywhere, C^H = T H(L'(shift/T))
        const double dphi = d.Lp(shift / T);
        CHECK(c.CH == Approx(T * d.H(dphi)).epsilon(1e-6));
        CHECK(c.CL == Approx(T * d.L(shift / T)).epsilon(1e-6));
        CHECK(std::abs(c.CH - c.CL) > 1e-3);  // non-quadratic: the costs differ
    }
}

TEST_CASE("K-convexity of the entropy") {
    SECTION("Lebesgue reference, quadratic H: displacement convexity (K = 0)") {
        Grid1D g{-0.3, 1.3, 1600};
        DensityProfile mu = gaussian_vs_lebesgue(0.35, 0.12, g);
        DensityProfile nu = gaussian_vs_lebesgue(0.62, 0.09, g);
        TransportPlan1D plan = monotone_transport(mu, nu, DualPair1D::quadratic(), 1.0);
        KConvexityResult r = k_convexity_check(DualPair1D::quadratic(), plan, mu, 0.0);
        CHECK(r.worst_defect <= 1e-5);
    }
    SECTION("Gaussian reference (psi'' = 1), quadratic H, K = 1") {
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, DualPair1D::quadratic(), 1.0);
        KConvexityResult r = k_convexity_check(DualPair1D::quadratic(), plan, mu, 1.0);
        CHECK(r.worst_defect <= 1e-6);
    }
    SECTION("p = 3, Lebesgue, K = 0") {
        Grid1D g{-0.3, 1.3, 1600};
        DensityProfile mu = gaussian_vs_lebesgue(0.35, 0.12, g);
        DensityProfile nu = gaussian_vs_lebesgue(0.62, 0.09, g);
        TransportPlan1D plan = monotone_transport(mu, nu, DualPair1D::power(3.0), 1.0);
        KConvexityResult r = k_convexity_check(DualPair1D::power(3.0), plan, mu, 0.0);
        CHECK(r.worst_defect <= 1e-5);
    }
}

TEST_CASE("entropy derivative bound") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("identity plan: both sides vanish") {
        DensityProfile mu = gaussian_vs_gauss(0.0, 1024);
        TransportPlan1D plan = monotone_transport(mu, mu, q, 1.0);
        EntropyDerivative r = entropy_derivative_check(q, plan, mu);
        CHECK(std::abs(r.lhs) <= 1e-8);
        CHECK(std::abs(r.rhs) <= 1e-8);
    }
    SECTION("Gaussian translation: equality at -a^2, gap below 1e-6") {
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a, 16384);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, q, 1.0);
        EntropyDerivative r = entropy_derivative_check(q, plan, mu);
        CHECK(r.lhs == Approx(-a * a).margin(1e-6));
        CHECK(r.rhs == Approx(-a * a).margin(1e-6));
        CHECK(r.slack() >= -1e-6);
    }
    SECTION("generic smooth fixture: nonnegative measured slack") {
        Grid1D g{-0.3, 1.3, 8192};
        DensityProfile mu = gaussian_vs_lebesgue(0.4, 0.15, g);
        DensityProfile nu = gaussian_vs_lebesgue(0.6, 0.1, g);
        TransportPlan1D plan = monotone_transport(mu, nu, q, 1.0);
        EntropyDerivative r = entropy_derivative_check(q, plan, mu);
        CHECK(r.slack() >= -1e-6);
    }
    SECTION("Jacobian rate (D_m[T_t] - 1)/t approaches Delta^H_m phi") {
        // Gaussian translation toward m: grad phi = -a, so
        // Delta^H_m phi = -(-a) psi'(x) = a x for the quadratic pair
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a, 8192);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TransportPlan1D plan = monotone_transport(mu, m0, q, 1.0);
        const double t = 1e-3;
        std::vector<double> rate = jacobian_rate(plan, mu, t);
        for (int i = 0; i < mu.grid.n; ++i) {
            const double x = mu.grid.center(i);
            if (std::abs(x) > 3.0) continue;
            CHECK(rate[static_cast<size_t>(i)] == Approx(a * x).margin(0.02));
        }
    }
}

TEST_CASE("Talagrand and HWI inequalities") {
    DualPair1D q = DualPair1D::quadratic();
    SECTION("Gaussian pair, K = T = 1: closed forms reproduced") {
        const double a = 0.8;
        DensityProfile mu = gaussian_vs_gauss(a);
        DensityProfile m0 = make_profile(mu.grid, [](double) { return 1.0; }, gauss_psi);
        TalagrandHwi r = talagrand_hwi_check(q, mu, m0, 1.0, 1.0);
        const double half_a2 = 0.5 * a * a;
        CHECK(r.ent == Approx(half_a2).margin(1e-6));
        CHECK(r.fisher == Approx(half_a2).margin(1e-6));
        CHECK(r.CH == Approx(half_a2).margin(1e-6));
        CHECK(r.CL == Approx(half_a2).margin(1e-6));
        CHECK(r.intL == Approx(half_a2).margin(1e-6));
        // closed-form slacks: (2/KT) Ent - C^H = a^2/2; HWI slack = a^2/4
        CHECK(r.talagrand_slack == Approx(half_a2).margin(1e-5));
        CHECK(r.hwi_slack == Approx(0.5 * half_a2).margin(1e-5));
    }
    SECTION("mu = m: every term vanishes") {
        DensityProfile m0 = gaussian_vs_gauss(0.0, 1024);
        TalagrandHwi r = talagrand_hwi_check(q, m0, m0, 1.0, 1.0);
        CHECK(std::abs(r.ent) <= 1e-9);
        CHECK(std::abs(r.CH) <= 1e-9);
        CHECK(r.talagrand_slack >= -1e-9);
        CHECK(r.hwi_slack >= -1e-9);
    }
    SECTION("perturbed Gaussian: inequalities hold with positive slack") {
        const double eps = 0.15;
        Grid1D g{-9.0, 9.0, 2048};
        DensityProfile mu = make_profile(
            g, [eps](double x) { return std::exp(-eps * x * x * x * x); }, gauss_psi);
        DensityProfile m0 = make_profile(g, [](double) { return 1.0; }, gauss_psi);
        TalagrandHwi r = talagrand_hwi_check(q, mu, m0, 1.0, 1.0);
        CHECK(r.talagrand_slack > 0.0);
        CHECK(r.hwi_slack > 0.0);
    }
}
