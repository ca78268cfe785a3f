#pragma once

// Builtin Hamiltonian zoo: Riemannian quadratics, natural mechanical
// Hamiltonians H^g + Z, Randers-type Finsler duals, convex deformations
// h(F*) and their p-homogeneous special case, and the round-sphere chart.
// Everything is constructible by name + JSON parameter object.

#include <json.hpp>

#include "hamflow/hamiltonians.hpp"

namespace hamflow {

using nlohmann::json;

// --- scalar field forms (potentials Z, weights varsigma) --------------------

inline JetField scalar_zero() {
    return [](std::span<const Jet> v) { return Jet::constant(v[0].nvars(), v[0].order(), 0.0); };
}
inline JetField scalar_constant(double c) {
    return [c](std::span<const Jet> v) { return Jet::constant(v[0].nvars(), v[0].order(), c); };
}
inline JetField scalar_linear(VectorXd a) {
    return [a](std::span<const Jet> v) {
        Jet s = Jet::constant(v[0].nvars(), v[0].order(), 0.0);
        for (int i = 0; i < a.size(); ++i) s = s + a[i] * v[static_cast<size_t>(i)];
        return s;
    };
}
// (1/2) sum_i c_i x_i^2
inline JetField scalar_quadratic(VectorXd c) {
    return [c](std::span<const Jet> v) {
        Jet s = Jet::constant(v[0].nvars(), v[0].order(), 0.0);
        for (int i = 0; i < c.size(); ++i) s = s + 0.5 * c[i] * v[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        return s;
    };
}
struct TrigTerm {
    double amp = 0.0;
    VectorXd freq;
    double phase = 0.0;
};
inline JetField scalar_trig(std::vector<TrigTerm> terms) {
    return [terms](std::span<const Jet> v) {
        Jet s = Jet::constant(v[0].nvars(), v[0].order(), 0.0);
        for (const auto& t : terms) {
            Jet arg = Jet::constant(v[0].nvars(), v[0].order(), t.phase);
            for (int i = 0; i < t.freq.size(); ++i) arg = arg + t.freq[i] * v[static_cast<size_t>(i)];
            s = s + t.amp * sin(arg);
        }
        return s;
    };
}

inline VectorXd vector_from_json(const json& j) {
    VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline JetField make_scalar_field(const json& spec, int n) {
    if (spec.is_number()) return scalar_constant(spec.get<double>());
    const std::string type = spec.at("type").get<std::string>();
    if (type == "zero") return scalar_zero();
    if (type == "constant") return scalar_constant(spec.at("value").get<double>());
    if (type == "linear") return scalar_linear(vector_from_json(spec.at("coeffs")));
    if (type == "quadratic") return scalar_quadratic(vector_from_json(spec.at("coeffs")));
    if (type == "trig") {
        std::vector<TrigTerm> terms;
        for (const auto& t : spec.at("terms")) {
            TrigTerm term;
            term.amp = t.at("amp").get<double>();
            term.freq = vector_from_json(t.at("freq"));
            term.phase = t.value("phase", 0.0);
            if (term.freq.size() != n) throw Error("trig term frequency dimension mismatch");
            terms.push_back(term);
        }
        return scalar_trig(std::move(terms));
    }
    throw Error("unknown scalar field type: " + type);
}

inline WeightField make_weight(const json& spec, int n) {
    WeightField w = WeightField::lebesgue(n);
    if (spec.is_null()) return w;
    w.varsigma = make_scalar_field(spec, n);
    w.name = spec.is_number() ? "constant" : spec.value("type", "custom");
    return w;
}

// --- Finsler co-metrics F*(x, alpha) ----------------------------------------

// A 1-homogeneous dual norm on the chart; smooth and strongly convex away
// from alpha = 0.
struct FinslerDual {
    std::string name;
    int n = 0;
    Chart chart;
    JetField fstar;  // on 2n variables (x; alpha)

    Jet operator()(std::span<const Jet> xa) const { return fstar(xa); }
};

namespace detail {

inline Jet alpha_sq(std::span<const Jet> xa, int n) {
    Jet q = Jet::constant(xa[0].nvars(), xa[0].order(), 0.0);
    for (int i = 0; i < n; ++i) q = q + xa[static_cast<size_t>(n + i)] * xa[static_cast<size_t>(n + i)];
    return q;
}
inline Jet x_sq(std::span<const Jet> xa, int n) {
    Jet q = Jet::constant(xa[0].nvars(), xa[0].order(), 0.0);
    for (int i = 0; i < n; ++i) q = q + xa[static_cast<size_t>(i)] * xa[static_cast<size_t>(i)];
    return q;
}
// conformal factor of the round unit sphere in the stereographic chart
inline Jet sphere_factor(std::span<const Jet> xa, int n) {
    Jet one_r2 = 1.0 + x_sq(xa, n);
    return 4.0 / (one_r2 * one_r2);
}

inline Chart default_box(int n, double half = 10.0) {
    return Chart::box(VectorXd::Constant(n, -half), VectorXd::Constant(n, half));
}

}  // namespace detail

inline FinslerDual euclidean_dual(int n) {
    FinslerDual d;
    d.name = "euclidean";
    d.n = n;
    d.chart = detail::default_box(n);
    d.fstar = [n](std::span<const Jet> xa) { return sqrt(detail::alpha_sq(xa, n)); };
    return d;
}

// F*(alpha) = sqrt(alpha^T G^{-1} alpha) for a constant SPD metric G
inline FinslerDual constant_metric_dual(const MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw Error("metric must be positive-definite");
    const MatrixXd ginv = llt.solve(MatrixXd::Identity(n, n));
    FinslerDual d;
    d.name = "constant_metric";
    d.n = n;
    d.chart = detail::default_box(n);
    d.fstar = [n, ginv](std::span<const Jet> xa) {
        Jet q = Jet::constant(xa[0].nvars(), xa[0].order(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                q = q + ginv(i, j) * xa[static_cast<size_t>(n + i)] * xa[static_cast<size_t>(n + j)];
        return sqrt(q);
    };
    return d;
}

// round unit sphere S^2 in the stereographic chart: g = c(x) I with
// c = 4 / (1+|x|^2)^2, so F*(x, alpha) = |alpha| / sqrt(c(x))
inline FinslerDual sphere_dual() {
    const int n = 2;
    FinslerDual d;
    d.name = "sphere";
    d.n = n;
    d.chart = detail::default_box(n, 3.0);
    d.fstar = [n](std::span<const Jet> xa) {
        return sqrt(detail::alpha_sq(xa, n) / detail::sphere_factor(xa, n));
    };
    return d;
}

// Randers dual norm for F(v) = sqrt(c(x)|v|^2) + b.v with constant drift b
// and conformal base metric c(x) I (c = 1 gives the flat case). Requires
// |b|^2 < c on the chart. The dual is again of Randers type:
//   F*(a) = sqrt(|a|^2/(c l) + (b.a)^2/(c l)^2) - (b.a)/(c l),  l = 1 - |b|^2/c.
inline FinslerDual randers_dual(int n, const VectorXd& drift, bool sphere_base = false) {
    if (sphere_base && n != 2) throw Error("sphere-based Randers requires n = 2");
    FinslerDual d;
    d.name = sphere_base ? "randers_sphere" : "randers";
    d.n = n;
    d.chart = sphere_base ? detail::default_box(n, 3.0) : detail::default_box(n);
    const VectorXd b = drift;
    d.fstar = [n, b, sphere_base](std::span<const Jet> xa) {
        Jet c = sphere_base ? detail::sphere_factor(xa, n)
                            : Jet::constant(xa[0].nvars(), xa[0].order(), 1.0);
        Jet ba = Jet::constant(xa[0].nvars(), xa[0].order(), 0.0);
        for (int i = 0; i < n; ++i) ba = ba + b[i] * xa[static_cast<size_t>(n + i)];
        Jet lam = 1.0 - b.squaredNorm() / c;
        Jet cl = c * lam;
        Jet q = detail::alpha_sq(xa, n) / cl + (ba * ba) / (cl * cl);
        return sqrt(q) - ba / cl;
    };
    // positive-definiteness of F* needs |b|^2 < c on the chart; probe corners
    if (!sphere_base && drift.squaredNorm() >= 1.0)
        throw Error("Randers drift too large: positive-definiteness lost");
    return d;
}

// --- convex deformation profiles h ------------------------------------------

// h convex with h(0) = h'(0) = 0 and h'' > 0 on (0, inf).
struct ConvexProfile {
    enum class Kind { Quadratic, Power };
    Kind kind = Kind::Quadratic;
    double a = 1.0;  // h(t) = (a t)^2 / 2
    double p = 2.0;  // h(t) = t^p / p

    static ConvexProfile quadratic(double a) {
        if (a == 0.0) throw Error("deformation violates convexity preconditions");
        ConvexProfile h;
        h.kind = Kind::Quadratic;
        h.a = a;
        return h;
    }
    static ConvexProfile power(double p) {
        if (p <= 1.0) throw Error("deformation violates convexity preconditions");
        ConvexProfile h;
        h.kind = Kind::Power;
        h.p = p;
        return h;
    }

    double value(double t) const { return kind == Kind::Quadratic ? 0.5 * a * a * t * t : std::pow(t, p) / p; }
    double d1(double t) const { return kind == Kind::Quadratic ? a * a * t : std::pow(t, p - 1); }
    double d2(double t) const { return kind == Kind::Quadratic ? a * a : (p - 1) * std::pow(t, p - 2); }
    double d3(double t) const {
        return kind == Kind::Quadratic ? 0.0 : (p - 1) * (p - 2) * std::pow(t, p - 3);
    }
    Jet apply(const Jet& t) const { return t.compose(value(t.value()), d1(t.value()), d2(t.value()), d3(t.value())); }
    std::string describe() const {
        return kind == Kind::Quadratic ? "(a t)^2/2, a=" + std::to_string(a) : "t^p/p, p=" + std::to_string(p);
    }
};

// --- builtin constructors ----------------------------------------------------

// H^F = F*^2/2 through the dual norm oracle. The sqrt in F* makes the zero
// section only C^1 unless the norm is an inner-product norm, so the result
// is conservatively marked non-smooth there; quadratic metrics have their
// own direct constructors below.
inline ChartHamiltonian finsler_quadratic(const FinslerDual& dual) {
    JetField f = [dual](std::span<const Jet> xa) {
        Jet fs = dual.fstar(xa);
        return 0.5 * fs * fs;
    };
    return ChartHamiltonian("finsler[" + dual.name + "]", dual.n, dual.chart, false, std::move(f));
}

inline ChartHamiltonian euclidean(int n) {
    JetField f = [n](std::span<const Jet> xa) { return 0.5 * detail::alpha_sq(xa, n); };
    return ChartHamiltonian("euclidean", n, detail::default_box(n), true, std::move(f));
}

inline ChartHamiltonian riemannian_constant(const MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw Error("metric must be positive-definite");
    const MatrixXd ginv = llt.solve(MatrixXd::Identity(n, n));
    JetField f = [n, ginv](std::span<const Jet> xa) {
        Jet q = Jet::constant(xa[0].nvars(), xa[0].order(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                q = q + 0.5 * ginv(i, j) * xa[static_cast<size_t>(n + i)] * xa[static_cast<size_t>(n + j)];
        return q;
    };
    return ChartHamiltonian("riemannian:constant", n, detail::default_box(n), true, std::move(f));
}

inline ChartHamiltonian sphere_chart() {
    const int n = 2;
    JetField f = [n](std::span<const Jet> xa) {
        return 0.5 * detail::alpha_sq(xa, n) / detail::sphere_factor(xa, n);
    };
    return ChartHamiltonian("sphere_chart", n, detail::default_box(n, 3.0), true, std::move(f));
}

// H = H^g + Z(x); the base metric is Euclidean or the sphere chart. Smooth on
// the whole of T*M, so nonnegativity and H(x,0) = 0 are waived.
inline ChartHamiltonian mechanical(ChartHamiltonian base, JetField potential, Chart chart_override = Chart{}) {
    const int n = base.dim();
    Chart chart = chart_override.dim() == n ? chart_override : base.chart();
    JetField basef = [base](std::span<const Jet> xa) { return base.eval_jets(xa); };
    JetField f = [basef, potential, n](std::span<const Jet> xa) {
        return basef(xa) + potential(xa.subspan(0, static_cast<size_t>(n)));
    };
    return ChartHamiltonian("mechanical[" + base.name() + "]", n, chart, base.zero_section_smooth(),
                            std::move(f), /*fiberwise_nonneg=*/false);
}

// H = h(F*(alpha)); only C^1 across the zero section in general.
inline ChartHamiltonian deformation(const ConvexProfile& h, const FinslerDual& dual) {
    JetField f = [h, dual](std::span<const Jet> xa) { return h.apply(dual.fstar(xa)); };
    const bool smooth0 = false;
    ChartHamiltonian H("deformation[" + dual.name + "; h=" + h.describe() + "]", dual.n, dual.chart,
                       smooth0, std::move(f));
    return H;
}

inline ChartHamiltonian p_homogeneous(double p, const FinslerDual& dual) {
    return deformation(ConvexProfile::power(p), dual);
}

// torus chart helper for periodic fixtures
inline Chart torus_chart(int n, double length = 2.0 * M_PI) {
    return Chart::torus(VectorXd::Constant(n, length));
}

inline ChartHamiltonian with_chart(ChartHamiltonian H, Chart chart) {
    JetField f = [H](std::span<const Jet> xa) { return H.eval_jets(xa); };
    return ChartHamiltonian(H.name(), H.dim(), std::move(chart), H.zero_section_smooth(), std::move(f));
}

// --- name + JSON factory (the CLI entry point) -------------------------------

inline FinslerDual make_finsler_dual(const json& spec) {
    const std::string type = spec.at("type").get<std::string>();
    if (type == "euclidean") return euclidean_dual(spec.at("dim").get<int>());
    if (type == "constant_metric") {
        const json& gj = spec.at("g");
        const int n = static_cast<int>(gj.size());
        MatrixXd g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = gj[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
        return constant_metric_dual(g);
    }
    if (type == "sphere") return sphere_dual();
    if (type == "randers") {
        const VectorXd b = vector_from_json(spec.at("drift"));
        const bool sphere_base = spec.value("sphere_base", false);
        return randers_dual(sphere_base ? 2 : static_cast<int>(b.size()), b, sphere_base);
    }
    throw Error("unknown Finsler dual type: " + type);
}

inline ChartHamiltonian make_builtin(const std::string& name, const json& params) {
    ChartHamiltonian H;
    if (name == "euclidean") {
        H = euclidean(params.at("dim").get<int>());
    } else if (name == "riemannian") {
        const json& m = params.at("metric");
        const std::string type = m.at("type").get<std::string>();
        if (type == "identity")
            H = euclidean(m.at("dim").get<int>());
        else if (type == "sphere")
            H = sphere_chart();
        else if (type == "constant") {
            const json& gj = m.at("g");
            const int n = static_cast<int>(gj.size());
            MatrixXd g(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = gj[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
            H = riemannian_constant(g);
        } else
            throw Error("unknown metric type: " + type);
    } else if (name == "sphere_chart") {
        H = sphere_chart();
    } else if (name == "mechanical") {
        ChartHamiltonian base =
            params.contains("metric") ? make_builtin("riemannian", params) : euclidean(params.at("dim").get<int>());
        JetField Z = make_scalar_field(params.at("potential"), base.dim());
        H = mechanical(std::move(base), std::move(Z));
    } else if (name == "randers") {
        H = finsler_quadratic(make_finsler_dual(json{{"type", "randers"},
                                                     {"drift", params.at("drift")},
                                                     {"sphere_base", params.value("sphere_base", false)}}));
    } else if (name == "deformation") {
        const json& pj = params.at("profile");
        ConvexProfile prof = pj.at("type").get<std::string>() == "quadratic"
                                 ? ConvexProfile::quadratic(pj.at("a").get<double>())
                                 : ConvexProfile::power(pj.at("p").get<double>());
        H = deformation(prof, make_finsler_dual(params.at("base")));
    } else if (name == "p_homogeneous") {
        H = p_homogeneous(params.at("p").get<double>(), make_finsler_dual(params.at("base")));
    } else {
        throw Error("unknown builtin Hamiltonian: " + name);
    }
    if (params.contains("torus")) {
        const json& t = params.at("torus");
        H = with_chart(H, Chart::torus(vector_from_json(t)));
    }
    sample_invariants(H);
    return H;
}

}  // namespace hamflow
