#pragma once

// Truncated multivariate Taylor arithmetic (order <= 3) plus
// Richardson-extrapolated derivatives along time curves.
//
// Phase-space derivatives of a Hamiltonian oracle are exact to the stored
// order; derivatives along numerically integrated curves are obtained by
// central differences on the stencil {t0 +- h, +- 2h, +- 4h}.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hamflow/common.hpp"

namespace hamflow {

inline constexpr int kMaxJetVars = 6;  // up to n = 3 chart dimensions

class Jet {
public:
    Jet() = default;

    // copy only the live prefix of each tensor; the tail is never read
    // because all arithmetic is gated on (nvars, order)
    Jet(const Jet& o) : m_(o.m_), ord_(o.ord_), val_(o.val_) {
        const size_t m = static_cast<size_t>(m_);
        if (ord_ >= 1) std::copy_n(o.g_.data(), m, g_.data());
        if (ord_ >= 2) std::copy_n(o.h_.data(), m * m, h_.data());
        if (ord_ >= 3) std::copy_n(o.t_.data(), m * m * m, t_.data());
    }
    Jet& operator=(const Jet& o) {
        m_ = o.m_;
        ord_ = o.ord_;
        val_ = o.val_;
        const size_t m = static_cast<size_t>(m_);
        if (ord_ >= 1) std::copy_n(o.g_.data(), m, g_.data());
        if (ord_ >= 2) std::copy_n(o.h_.data(), m * m, h_.data());
        if (ord_ >= 3) std::copy_n(o.t_.data(), m * m * m, t_.data());
        return *this;
    }

    static Jet constant(int nvars, int order, double value) {
        Jet j;
        j.init(nvars, order);
        j.val_ = value;
        return j;
    }

    static Jet variable(int nvars, int order, int index, double value) {
        Jet j = constant(nvars, order, value);
        if (order >= 1) j.g_[static_cast<size_t>(index)] = 1.0;
        return j;
    }

    int nvars() const { return m_; }
    int order() const { return ord_; }
    double value() const { return val_; }
    double d(int i) const { return g_[idx1(i)]; }
    double d2(int i, int j) const { return h_[idx2(i, j)]; }
    double d3(int i, int j, int k) const { return t_[idx3(i, j, k)]; }

    double& dref(int i) { return g_[idx1(i)]; }
    double& d2ref(int i, int j) { return h_[idx2(i, j)]; }
    double& d3ref(int i, int j, int k) { return t_[idx3(i, j, k)]; }

    bool finite() const {
        if (!std::isfinite(val_)) return false;
        const int m = m_;
        if (ord_ >= 1)
            for (int i = 0; i < m; ++i)
                if (!std::isfinite(g_[static_cast<size_t>(i)])) return false;
        if (ord_ >= 2)
            for (int i = 0; i < m * m; ++i)
                if (!std::isfinite(h_[static_cast<size_t>(i)])) return false;
        if (ord_ >= 3)
            for (int i = 0; i < m * m * m; ++i)
                if (!std::isfinite(t_[static_cast<size_t>(i)])) return false;
        return true;
    }

    Jet operator-() const {
        Jet r = *this;
        r.val_ = -r.val_;
        const int m = m_;
        if (ord_ >= 1)
            for (int i = 0; i < m; ++i) r.g_[static_cast<size_t>(i)] = -r.g_[static_cast<size_t>(i)];
        if (ord_ >= 2)
            for (int i = 0; i < m * m; ++i) r.h_[static_cast<size_t>(i)] = -r.h_[static_cast<size_t>(i)];
        if (ord_ >= 3)
            for (int i = 0; i < m * m * m; ++i) r.t_[static_cast<size_t>(i)] = -r.t_[static_cast<size_t>(i)];
        return r;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        Jet r = a.blank_with(b);
        const int m = r.m_;
        r.val_ = a.val_ + b.val_;
        if (r.ord_ >= 1)
            for (int i = 0; i < m; ++i)
                r.g_[static_cast<size_t>(i)] = a.g_[static_cast<size_t>(i)] + b.g_[static_cast<size_t>(i)];
        if (r.ord_ >= 2)
            for (int i = 0; i < m * m; ++i)
                r.h_[static_cast<size_t>(i)] = a.h_[static_cast<size_t>(i)] + b.h_[static_cast<size_t>(i)];
        if (r.ord_ >= 3)
            for (int i = 0; i < m * m * m; ++i)
                r.t_[static_cast<size_t>(i)] = a.t_[static_cast<size_t>(i)] + b.t_[static_cast<size_t>(i)];
        return r;
    }

    friend Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r = a.blank_with(b);
        const int m = r.m_;
        r.val_ = a.val_ * b.val_;
        if (r.ord_ >= 1) {
            for (int i = 0; i < m; ++i)
                r.g_[static_cast<size_t>(i)] = a.d(i) * b.val_ + a.val_ * b.d(i);
        }
        if (r.ord_ >= 2) {
            // fill the upper simplex and mirror: symmetry is exact by construction
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j) {
                    const double v =
                        a.d2(i, j) * b.val_ + a.d(i) * b.d(j) + a.d(j) * b.d(i) + a.val_ * b.d2(i, j);
                    r.set2(i, j, v);
                }
        }
        if (r.ord_ >= 3) {
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j)
                    for (int k = j; k < m; ++k) {
                        const double v =
                            a.d3(i, j, k) * b.val_
                            + a.d2(i, j) * b.d(k) + a.d2(i, k) * b.d(j) + a.d2(j, k) * b.d(i)
                            + a.d(i) * b.d2(j, k) + a.d(j) * b.d2(i, k) + a.d(k) * b.d2(i, j)
                            + a.val_ * b.d3(i, j, k);
                        r.set3(i, j, k, v);
                    }
        }
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) { return a * recip(b); }

    friend Jet operator+(const Jet& a, double c) { Jet r = a; r.val_ += c; return r; }
    friend Jet operator+(double c, const Jet& a) { return a + c; }
    friend Jet operator-(const Jet& a, double c) { return a + (-c); }
    friend Jet operator-(double c, const Jet& a) { return (-a) + c; }
    friend Jet operator*(const Jet& a, double c) {
        Jet r = a;
        r.val_ *= c;
        const int m = r.m_;
        if (r.ord_ >= 1)
            for (int i = 0; i < m; ++i) r.g_[static_cast<size_t>(i)] *= c;
        if (r.ord_ >= 2)
            for (int i = 0; i < m * m; ++i) r.h_[static_cast<size_t>(i)] *= c;
        if (r.ord_ >= 3)
            for (int i = 0; i < m * m * m; ++i) r.t_[static_cast<size_t>(i)] *= c;
        return r;
    }
    friend Jet operator*(double c, const Jet& a) { return a * c; }
    friend Jet operator/(const Jet& a, double c) { return a * (1.0 / c); }
    friend Jet operator/(double c, const Jet& a) { return recip(a) * c; }

    // phi composed with this jet; c1..c3 are phi', phi'', phi''' at value().
    Jet compose(double c0, double c1, double c2, double c3) const {
        Jet r = *this;
        const int m = m_;
        r.val_ = c0;
        if (ord_ >= 1)
            for (int i = 0; i < m; ++i) r.g_[static_cast<size_t>(i)] = c1 * d(i);
        if (ord_ >= 2)
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j)
                    r.set2(i, j, c2 * d(i) * d(j) + c1 * d2(i, j));
        if (ord_ >= 3)
            for (int i = 0; i < m; ++i)
                for (int j = i; j < m; ++j)
                    for (int k = j; k < m; ++k)
                        r.set3(i, j, k,
                               c3 * d(i) * d(j) * d(k)
                               + c2 * (d2(i, j) * d(k) + d2(i, k) * d(j) + d2(j, k) * d(i))
                               + c1 * d3(i, j, k));
        return r;
    }

    friend Jet recip(const Jet& a) {
        const double v = a.val_;
        return a.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v));
    }
    friend Jet sqrt(const Jet& a) {
        const double s = std::sqrt(a.val_);
        if (a.ord_ == 0) return a.compose(s, 0, 0, 0);
        return a.compose(s, 0.5 / s, -0.25 / (s * s * s), 0.375 / (s * s * s * s * s));
    }
    friend Jet exp(const Jet& a) {
        const double e = std::exp(a.val_);
        return a.compose(e, e, e, e);
    }
    friend Jet log(const Jet& a) {
        const double v = a.val_;
        return a.compose(std::log(v), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
    }
    friend Jet sin(const Jet& a) {
        const double s = std::sin(a.val_), c = std::cos(a.val_);
        return a.compose(s, c, -s, -c);
    }
    friend Jet cos(const Jet& a) {
        const double s = std::sin(a.val_), c = std::cos(a.val_);
        return a.compose(c, -s, -c, s);
    }
    // real power t^p for t > 0
    friend Jet pow(const Jet& a, double p) {
        const double v = a.val_;
        if (a.ord_ == 0) return a.compose(std::pow(v, p), 0, 0, 0);
        return a.compose(std::pow(v, p), p * std::pow(v, p - 1), p * (p - 1) * std::pow(v, p - 2),
                         p * (p - 1) * (p - 2) * std::pow(v, p - 3));
    }

private:
    void init(int nvars, int order) {
        m_ = nvars;
        ord_ = order;
        const size_t m = static_cast<size_t>(nvars);
        if (order >= 1) std::fill_n(g_.data(), m, 0.0);
        if (order >= 2) std::fill_n(h_.data(), m * m, 0.0);
        if (order >= 3) std::fill_n(t_.data(), m * m * m, 0.0);
    }
    Jet blank_with(const Jet& b) const {
        Jet r;
        r.init(m_, std::min(ord_, b.ord_));
        return r;
    }
    size_t idx1(int i) const { return static_cast<size_t>(i); }
    size_t idx2(int i, int j) const { return static_cast<size_t>(i * m_ + j); }
    size_t idx3(int i, int j, int k) const { return static_cast<size_t>((i * m_ + j) * m_ + k); }

    void set2(int i, int j, double v) {
        h_[idx2(i, j)] = v;
        h_[idx2(j, i)] = v;
    }
    void set3(int i, int j, int k, double v) {
        t_[idx3(i, j, k)] = v;
        t_[idx3(i, k, j)] = v;
        t_[idx3(j, i, k)] = v;
        t_[idx3(j, k, i)] = v;
        t_[idx3(k, i, j)] = v;
        t_[idx3(k, j, i)] = v;
    }

    int m_ = 0;
    int ord_ = 0;
    double val_ = 0.0;
    std::array<double, kMaxJetVars> g_{};
    std::array<double, kMaxJetVars * kMaxJetVars> h_{};
    std::array<double, kMaxJetVars * kMaxJetVars * kMaxJetVars> t_{};
};

// A smooth scalar field given as an oracle on jets.
using JetField = std::function<Jet(std::span<const Jet>)>;

// Evaluate a scalar field oracle at a point, returning derivatives exact to
// the requested order. Signals when the oracle leaves its smooth domain.
inline Jet jet_eval(const JetField& f, std::span<const double> point, int order) {
    const int m = static_cast<int>(point.size());
    if (m > kMaxJetVars) throw Error("too many jet variables");
    std::array<Jet, kMaxJetVars> vars;
    for (int i = 0; i < m; ++i)
        vars[static_cast<size_t>(i)] = Jet::variable(m, order, i, point[static_cast<size_t>(i)]);
    Jet out = f(std::span<const Jet>(vars.data(), static_cast<size_t>(m)));
    if (!out.finite()) throw Error("evaluation outside smooth domain");
    return out;
}

struct CurveDerivs {
    double d1 = 0.0;   // g'(t0)
    double d2 = 0.0;   // g''(t0)
    double err1 = 0.0; // Richardson error estimates
    double err2 = 0.0;
};

// Central differences on {t0 +- h, +- 2h, +- 4h} with two Richardson levels.
// Default base step h0 = 1e-3 * (1 + |t0|).
inline CurveDerivs curve_derivatives(const std::function<double(double)>& g, double t0,
                                     int order = 2, double h0 = 0.0, double tol = 0.0) {
    if (h0 <= 0.0) h0 = 1e-3 * (1.0 + std::abs(t0));
    const double g0 = g(t0);
    double gp[3], gm[3];  // at +-h, +-2h, +-4h
    for (int l = 0; l < 3; ++l) {
        const double s = h0 * static_cast<double>(1 << l);
        gp[l] = g(t0 + s);
        gm[l] = g(t0 - s);
    }
    CurveDerivs out;
    {
        double D[3];
        for (int l = 0; l < 3; ++l) {
            const double s = h0 * static_cast<double>(1 << l);
            D[l] = (gp[l] - gm[l]) / (2.0 * s);
        }
        const double R1a = (4.0 * D[0] - D[1]) / 3.0;
        const double R1b = (4.0 * D[1] - D[2]) / 3.0;
        const double R2 = (16.0 * R1a - R1b) / 15.0;
        out.d1 = R2;
        out.err1 = std::abs(R2 - R1a);
    }
    if (order >= 2) {
        double C[3];
        for (int l = 0; l < 3; ++l) {
            const double s = h0 * static_cast<double>(1 << l);
            C[l] = (gp[l] - 2.0 * g0 + gm[l]) / (s * s);
        }
        const double R1a = (4.0 * C[0] - C[1]) / 3.0;
        const double R1b = (4.0 * C[1] - C[2]) / 3.0;
        const double R2 = (16.0 * R1a - R1b) / 15.0;
        out.d2 = R2;
        out.err2 = std::abs(R2 - R1a);
    }
    if (tol > 0.0 && (out.err1 > tol || (order >= 2 && out.err2 > tol)))
        throw Error("step size unresolvable");
    return out;
}

// Same stencil on an equispaced sample array; center must have >= 4 nodes of
// margin on each side.
inline CurveDerivs curve_derivatives_grid(std::span<const double> values, int center, double dt,
                                          int order = 2) {
    if (center < 4 || center + 4 >= static_cast<int>(values.size()))
        throw Error("curve stencil needs 4 nodes of margin");
    auto g = [&](double t) {
        const double k = (t - 0.0) / dt;  // offsets are exact multiples of dt
        const int idx = center + static_cast<int>(std::lround(k));
        return values[static_cast<size_t>(idx)];
    };
    return curve_derivatives(g, 0.0, order, dt);
}

}  // namespace hamflow
